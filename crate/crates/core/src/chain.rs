//! Steady-state fields of a chain of beads along the waveguide.
//!
//! Beads are converted into transfer matrices that map the amplitudes on the
//! left of a bead onto those on its right, ordered `(A1, B1, A2, B2)` →
//! `(C1, D1, C2, D2)`. The chain product then reduces the boundary-value
//! problem (forward amplitudes fixed on the left, backward amplitudes fixed
//! on the right) to a single 2×2 solve.

use nalgebra::{Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::scatter::{Mat2, Mat4, ModePair, ScatterMatrix, SimpleFourPortParams};

/// Condition number above which the boundary system is reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Relative residual allowed on the reconstructed right boundary.
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-10;

const DET_FLOOR: f64 = 1e-14;

/// Interleaved transfer order ↔ grouped scattering order; an involution.
const PERM: [usize; 4] = [0, 2, 1, 3];

/// Bead transfer matrix, `(A1, B1, A2, B2)` → `(C1, D1, C2, D2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: Mat4,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        Self {
            m: Mat4::identity(),
        }
    }

    /// Transfer matrix of a bare gap, diag(e^{ik1d}, e^{-ik1d}, e^{ik2d}, e^{-ik2d}).
    pub fn gap(d: f64, modes: &ModePair) -> Result<Self> {
        let p = crate::scatter::propagation_matrix(d, modes)?;
        let [f1, f2, b1, b2] = p.phases;
        Ok(Self {
            m: Mat4::from_diagonal(&Vector4::new(f1, b1, f2, b2)),
        })
    }

    /// `self` followed by `next` (i.e. `next · self`).
    pub fn then(&self, next: &TransferMatrix) -> TransferMatrix {
        TransferMatrix { m: next.m * self.m }
    }

    pub fn apply(&self, left: [Complex64; 4]) -> [Complex64; 4] {
        let v = self.m * Vector4::from(left);
        [v[0], v[1], v[2], v[3]]
    }

    /// Rearranges back into scattering form.
    pub fn to_scatter(&self) -> Result<ScatterMatrix> {
        let g = permute(&self.m);
        let ca: Mat2 = g.fixed_view::<2, 2>(0, 0).into_owned();
        let cb: Mat2 = g.fixed_view::<2, 2>(0, 2).into_owned();
        let da: Mat2 = g.fixed_view::<2, 2>(2, 0).into_owned();
        let db: Mat2 = g.fixed_view::<2, 2>(2, 2).into_owned();
        let det = db.determinant().norm();
        let db_inv = if det > DET_FLOOR {
            db.try_inverse()
        } else {
            None
        }
        .ok_or(Error::NonInvertible { det })?;
        let mut s = Mat4::zeros();
        s.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&(ca - cb * db_inv * da));
        s.fixed_view_mut::<2, 2>(0, 2).copy_from(&(cb * db_inv));
        s.fixed_view_mut::<2, 2>(2, 0).copy_from(&(-db_inv * da));
        s.fixed_view_mut::<2, 2>(2, 2).copy_from(&db_inv);
        ScatterMatrix::lossy(s)
    }
}

fn permute(m: &Mat4) -> Mat4 {
    Mat4::from_fn(|i, j| m[(PERM[i], PERM[j])])
}

/// Rearranges a scattering matrix into transfer form.
///
/// Requires the backward transmission block (B from D) to be invertible;
/// for the symmetric bead its determinant is 1 − r12².
pub fn to_transfer(s: &ScatterMatrix) -> Result<TransferMatrix> {
    let e = s.entries();
    let t: Mat2 = e.fixed_view::<2, 2>(0, 0).into_owned();
    let rp: Mat2 = e.fixed_view::<2, 2>(0, 2).into_owned();
    let r: Mat2 = e.fixed_view::<2, 2>(2, 0).into_owned();
    let tp: Mat2 = e.fixed_view::<2, 2>(2, 2).into_owned();
    let det = tp.determinant().norm();
    let tp_inv = if det > DET_FLOOR {
        tp.try_inverse()
    } else {
        None
    }
    .ok_or(Error::NonInvertible { det })?;
    let mut g = Mat4::zeros();
    g.fixed_view_mut::<2, 2>(0, 0)
        .copy_from(&(t - rp * tp_inv * r));
    g.fixed_view_mut::<2, 2>(0, 2).copy_from(&(rp * tp_inv));
    g.fixed_view_mut::<2, 2>(2, 0).copy_from(&(-tp_inv * r));
    g.fixed_view_mut::<2, 2>(2, 2).copy_from(&tp_inv);
    Ok(TransferMatrix { m: permute(&g) })
}

/// Beads, gaps and guided modes of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub beads: Vec<ScatterMatrix>,
    /// `beads.len() - 1` distances in units of `1/k1`.
    pub gaps: Vec<f64>,
    pub modes: ModePair,
}

impl ChainConfig {
    pub fn new(beads: Vec<ScatterMatrix>, gaps: Vec<f64>, modes: ModePair) -> Result<Self> {
        let cfg = Self { beads, gaps, modes };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `n` identical symmetric beads with equal spacing.
    pub fn identical(
        p: &SimpleFourPortParams,
        n: usize,
        gap: f64,
        modes: ModePair,
    ) -> Result<Self> {
        let bead = crate::scatter::build_four_port(p)?;
        Self::new(vec![bead; n], vec![gap; n.saturating_sub(1)], modes)
    }

    pub fn single(bead: ScatterMatrix, modes: ModePair) -> Result<Self> {
        Self::new(vec![bead], Vec::new(), modes)
    }

    pub fn validate(&self) -> Result<()> {
        self.modes.validate()?;
        if self.beads.is_empty() {
            return Err(domain("chain must contain at least one bead"));
        }
        if self.gaps.len() + 1 != self.beads.len() {
            return Err(domain(format!(
                "{} beads need {} gaps (got {})",
                self.beads.len(),
                self.beads.len() - 1,
                self.gaps.len()
            )));
        }
        if let Some(g) = self.gaps.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(domain(format!("gaps must be non-negative (got {g})")));
        }
        Ok(())
    }
}

/// Boundary amplitudes: forward modes injected at the left end, backward
/// modes injected at the right end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub a1: Complex64,
    pub a2: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
}

impl Injection {
    pub fn new(a1: Complex64, a2: Complex64, d1: Complex64, d2: Complex64) -> Result<Self> {
        let inj = Self { a1, a2, d1, d2 };
        inj.validate()?;
        Ok(inj)
    }

    /// Left-side injection only.
    pub fn forward(a1: Complex64, a2: Complex64) -> Result<Self> {
        let z = Complex64::new(0.0, 0.0);
        Self::new(a1, a2, z, z)
    }

    /// Unit power in the higher-order mode.
    pub fn higher_mode() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            a1: z,
            a2: Complex64::new(1.0, 0.0),
            d1: z,
            d2: z,
        }
    }

    /// Unit power in the fundamental mode.
    pub fn fundamental_mode() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            a1: Complex64::new(1.0, 0.0),
            a2: z,
            d1: z,
            d2: z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.a2, self.d1, self.d2];
        if all.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain("injected amplitudes must be finite"));
        }
        if self.power() == 0.0 {
            return Err(domain("at least one injected amplitude must be nonzero"));
        }
        Ok(())
    }

    /// Σ|injected amplitude|².
    pub fn power(&self) -> f64 {
        self.a1.norm_sqr() + self.a2.norm_sqr() + self.d1.norm_sqr() + self.d2.norm_sqr()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            a1: self.a1 * c,
            a2: self.a2 * c,
            d1: self.d1 * c,
            d2: self.d2 * c,
        }
    }
}

/// Incoming and outgoing amplitudes at one bead, indexed by mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeadFields {
    /// Forward, arriving from the left.
    pub a: [Complex64; 2],
    /// Backward, leaving to the left.
    pub b: [Complex64; 2],
    /// Forward, leaving to the right.
    pub c: [Complex64; 2],
    /// Backward, arriving from the right.
    pub d: [Complex64; 2],
}

impl BeadFields {
    fn from_planes(left: [Complex64; 4], right: [Complex64; 4]) -> Self {
        Self {
            a: [left[0], left[2]],
            b: [left[1], left[3]],
            c: [right[0], right[2]],
            d: [right[1], right[3]],
        }
    }

    pub fn incoming_power(&self) -> f64 {
        norm2(&self.a) + norm2(&self.d)
    }

    pub fn outgoing_power(&self) -> f64 {
        norm2(&self.b) + norm2(&self.c)
    }
}

fn norm2(v: &[Complex64; 2]) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// Solved amplitudes of a whole chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// Segment `0` is the injection plane left of the first bead, segment
    /// `s` lies immediately right of bead `s`. Amplitudes are ordered
    /// (fwd1, fwd2, bwd1, bwd2).
    pub segments: Vec<[Complex64; 4]>,
    pub beads: Vec<BeadFields>,
}

impl FieldState {
    fn from_planes(planes: &[([Complex64; 4], [Complex64; 4])]) -> Self {
        let beads: Vec<_> = planes
            .iter()
            .map(|(l, r)| BeadFields::from_planes(*l, *r))
            .collect();
        let mut segments = Vec::with_capacity(beads.len() + 1);
        let first = &beads[0];
        segments.push([first.a[0], first.a[1], first.b[0], first.b[1]]);
        for b in &beads {
            segments.push([b.c[0], b.c[1], b.d[0], b.d[1]]);
        }
        Self { segments, beads }
    }

    /// Largest absolute amplitude difference over all beads.
    pub fn max_difference(&self, other: &FieldState) -> f64 {
        self.beads
            .iter()
            .zip(&other.beads)
            .flat_map(|(x, y)| {
                (0..2).flat_map(move |i| {
                    [
                        (x.a[i] - y.a[i]).norm(),
                        (x.b[i] - y.b[i]).norm(),
                        (x.c[i] - y.c[i]).norm(),
                        (x.d[i] - y.d[i]).norm(),
                    ]
                })
            })
            .fold(0.0, f64::max)
    }
}

/// A chain with its bead transfer matrices precomputed, for repeated solves
/// with varying gaps.
#[derive(Debug, Clone)]
pub struct PreparedChain {
    transfers: Vec<TransferMatrix>,
    modes: ModePair,
}

impl PreparedChain {
    pub fn new(beads: &[ScatterMatrix], modes: ModePair) -> Result<Self> {
        modes.validate()?;
        if beads.is_empty() {
            return Err(domain("chain must contain at least one bead"));
        }
        let transfers = beads.iter().map(to_transfer).collect::<Result<_>>()?;
        Ok(Self { transfers, modes })
    }

    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    pub fn modes(&self) -> &ModePair {
        &self.modes
    }

    pub fn solve(&self, gaps: &[f64], inj: &Injection) -> Result<FieldState> {
        if gaps.len() + 1 != self.transfers.len() {
            return Err(domain(format!(
                "{} beads need {} gaps (got {})",
                self.transfers.len(),
                self.transfers.len() - 1,
                gaps.len()
            )));
        }
        let props = gaps
            .iter()
            .map(|&d| TransferMatrix::gap(d, &self.modes))
            .collect::<Result<Vec<_>>>()?;

        let mut total = self.transfers[0];
        for (p, t) in props.iter().zip(&self.transfers[1..]) {
            total = total.then(p).then(t);
        }
        let b = boundary_solve(&total.m, inj)?;

        let mut planes = Vec::with_capacity(self.transfers.len());
        let mut left = [inj.a1, b[0], inj.a2, b[1]];
        for (j, t) in self.transfers.iter().enumerate() {
            let right = t.apply(left);
            planes.push((left, right));
            if let Some(p) = props.get(j) {
                left = p.apply(right);
            }
        }

        check_boundary(&planes.last().expect("non-empty chain").1, inj)?;
        Ok(FieldState::from_planes(&planes))
    }

    /// Fields at both beads of a two-bead chain, without allocating.
    pub fn solve_pair(&self, gap: f64, inj: &Injection) -> Result<[BeadFields; 2]> {
        if self.transfers.len() != 2 {
            return Err(domain(format!(
                "solve_pair needs 2 beads (got {})",
                self.transfers.len()
            )));
        }
        if !(gap >= 0.0) {
            return Err(domain(format!("gap must be non-negative (got {gap})")));
        }
        let (t1, t2) = (&self.transfers[0].m, &self.transfers[1].m);
        let (s1, c1) = (self.modes.k1 * gap).sin_cos();
        let (s2, c2) = (self.modes.k2 * gap).sin_cos();
        let f1 = Complex64::new(c1, s1);
        let f2 = Complex64::new(c2, s2);
        let phase = [f1, f1.conj(), f2, f2.conj()];
        // T2 · P with P diagonal: scale the columns of T2
        let mut t2p = *t2;
        for (j, ph) in phase.iter().enumerate() {
            for i in 0..4 {
                t2p[(i, j)] *= ph;
            }
        }
        let total = t2p * t1;
        let b = boundary_solve(&total, inj)?;
        let left1 = [inj.a1, b[0], inj.a2, b[1]];
        let right1 = mul4(t1, &left1);
        let left2 = [
            right1[0] * phase[0],
            right1[1] * phase[1],
            right1[2] * phase[2],
            right1[3] * phase[3],
        ];
        let right2 = mul4(t2, &left2);
        check_boundary(&right2, inj)?;
        Ok([
            BeadFields::from_planes(left1, right1),
            BeadFields::from_planes(left2, right2),
        ])
    }
}

fn mul4(m: &Mat4, v: &[Complex64; 4]) -> [Complex64; 4] {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[(i, 0)] * v[0] + m[(i, 1)] * v[1] + m[(i, 2)] * v[2] + m[(i, 3)] * v[3];
    }
    out
}

/// Solves rows 1 and 3 of the chain transfer for the reflected amplitudes
/// (B1, B2) at the left end.
fn boundary_solve(m: &Mat4, inj: &Injection) -> Result<[Complex64; 2]> {
    let sys = Mat2::new(m[(1, 1)], m[(1, 3)], m[(3, 1)], m[(3, 3)]);
    let rhs = [
        inj.d1 - m[(1, 0)] * inj.a1 - m[(1, 2)] * inj.a2,
        inj.d2 - m[(3, 0)] * inj.a1 - m[(3, 2)] * inj.a2,
    ];
    let condition = condition_number(&sys);
    if !(condition < CONDITION_LIMIT) {
        return Err(Error::Singular { condition });
    }
    let det = sys[(0, 0)] * sys[(1, 1)] - sys[(0, 1)] * sys[(1, 0)];
    Ok([
        (rhs[0] * sys[(1, 1)] - rhs[1] * sys[(0, 1)]) / det,
        (sys[(0, 0)] * rhs[1] - sys[(1, 0)] * rhs[0]) / det,
    ])
}

fn check_boundary(right: &[Complex64; 4], inj: &Injection) -> Result<()> {
    let scale = inj.power().sqrt().max(f64::MIN_POSITIVE);
    let residual = ((right[1] - inj.d1).norm_sqr() + (right[3] - inj.d2).norm_sqr()).sqrt() / scale;
    if !(residual < BOUNDARY_RESIDUAL_TOL) {
        return Err(Error::Residual { residual });
    }
    Ok(())
}

/// 2-norm condition number from the Frobenius norm and determinant.
fn condition_number(m: &Mat2) -> f64 {
    let f = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let hi2 = 0.5 * (f + ((f - 2.0 * det) * (f + 2.0 * det)).max(0.0).sqrt());
    hi2 / det
}

/// Solves the chain for the given injection.
pub fn solve_chain(cfg: &ChainConfig, inj: &Injection) -> Result<FieldState> {
    cfg.validate()?;
    inj.validate()?;
    PreparedChain::new(&cfg.beads, cfg.modes)?.solve(&cfg.gaps, inj)
}

/// Field state obtained from the multiple-reflection series, with the
/// number of bounces that were summed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    pub fields: FieldState,
    pub bounces: usize,
}

/// Sums the reflections between two beads one bounce at a time.
///
/// Independent of the transfer-matrix route; used to cross-check
/// [`solve_chain`]. Stops once the amplitude still travelling in the gap
/// falls below 1e-15 of the injected amplitude.
pub fn fabry_perot_oracle(
    cfg: &ChainConfig,
    inj: &Injection,
    max_bounces: usize,
) -> Result<SeriesSolution> {
    cfg.validate()?;
    inj.validate()?;
    if cfg.beads.len() != 2 {
        return Err(domain("the reflection series is implemented for two beads"));
    }
    let blocks = |s: &ScatterMatrix| {
        let e = s.entries();
        (
            e.fixed_view::<2, 2>(0, 0).into_owned(),
            e.fixed_view::<2, 2>(0, 2).into_owned(),
            e.fixed_view::<2, 2>(2, 0).into_owned(),
            e.fixed_view::<2, 2>(2, 2).into_owned(),
        )
    };
    let (t1, rp1, r1, tp1): (Mat2, Mat2, Mat2, Mat2) = blocks(&cfg.beads[0]);
    let (t2, rp2, r2, tp2): (Mat2, Mat2, Mat2, Mat2) = blocks(&cfg.beads[1]);
    let d = cfg.gaps[0];
    let k = &cfg.modes;
    // Both directions accumulate e^{ikd} across the gap.
    let gap = Mat2::from_diagonal(&Vector2::new(
        Complex64::from_polar(1.0, k.k1 * d),
        Complex64::from_polar(1.0, k.k2 * d),
    ));

    let a_in = Vector2::new(inj.a1, inj.a2);
    let d_in = Vector2::new(inj.d1, inj.d2);
    let tol = 1e-15 * inj.power().sqrt();

    let mut b_left = r1 * a_in;
    let mut c_right = rp2 * d_in;
    let mut a_gap = Vector2::zeros();
    let mut d_gap = Vector2::zeros();
    // Waves travelling in the gap, about to hit bead 2 (fwd) and bead 1 (bwd).
    let mut fwd = gap * t1 * a_in;
    let mut bwd = gap * tp2 * d_in;

    let mut bounces = 0;
    loop {
        let increment = fwd.norm() + bwd.norm();
        if increment <= tol {
            break;
        }
        if bounces == max_bounces {
            return Err(Error::Divergence { bounces, increment });
        }
        a_gap += fwd;
        d_gap += bwd;
        c_right += t2 * fwd;
        b_left += tp1 * bwd;
        let next_fwd = gap * rp1 * bwd;
        let next_bwd = gap * r2 * fwd;
        fwd = next_fwd;
        bwd = next_bwd;
        bounces += 1;
    }

    let c1 = t1 * a_in + rp1 * d_gap;
    let b2 = r2 * a_gap + tp2 * d_in;
    let planes = [
        (
            [a_in[0], b_left[0], a_in[1], b_left[1]],
            [c1[0], d_gap[0], c1[1], d_gap[1]],
        ),
        (
            [a_gap[0], b2[0], a_gap[1], b2[1]],
            [c_right[0], d_in[0], c_right[1], d_in[1]],
        ),
    ];
    Ok(SeriesSolution {
        fields: FieldState::from_planes(&planes),
        bounces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scatter::{build_four_port, build_two_port};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &Mat4, b: &Mat4) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Transfer matrix as printed for the symmetric bead, with the
    /// reflection amplitude passed in explicitly.
    fn printed_transfer(t12: f64, r12: f64, phi: f64) -> Mat4 {
        let t = (1.0 - t12 * t12 - r12 * r12).sqrt();
        let den = 1.0 - r12 * r12;
        let i = c(0.0, 1.0);
        let e = Complex64::from_polar(1.0, phi);
        let em = Complex64::from_polar(1.0, -phi);
        let tc = c(t, 0.0);
        #[rustfmt::skip]
        let m = Mat4::new(
            tc,              i * r12 * t12,    -em * t12,        -i * r12 * t * em,
            i * r12 * t12,   tc,               i * r12 * t * em, em * t12,
            e * t12,         -i * e * r12 * t, tc,               -i * r12 * t12,
            i * r12 * t * e, -e * t12,         -i * r12 * t12,   tc,
        );
        m / c(den, 0.0)
    }

    #[test]
    fn identity_scatter_gives_identity_transfer() {
        let t = to_transfer(&ScatterMatrix::identity()).unwrap();
        assert_eq!(max_diff(&t.m, &Mat4::identity()), 0.0);
    }

    #[test]
    fn transfer_entry_for_reference_bead() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let t = to_transfer(&build_four_port(&p).unwrap()).unwrap();
        assert_abs_diff_eq!(t.m[(0, 0)].re, 0.84524, epsilon = 1e-5);
        assert_abs_diff_eq!(t.m[(0, 0)].re, p.t() / (1.0 - 0.12 * 0.12), epsilon = 1e-15);
    }

    #[test]
    fn transfer_matches_printed_form_up_to_reflection_phase() {
        // The printed matrix corresponds to the bead with r12 -> -r12,
        // i.e. a π shift of the reflection phase.
        for &(t12, r12, phi) in &[(0.54, 0.12, 0.0), (0.3, 0.5, 1.1), (0.8, 0.05, -2.0)] {
            let p = SimpleFourPortParams::new(t12, r12, phi).unwrap();
            let t = to_transfer(&build_four_port(&p).unwrap()).unwrap();
            assert!(max_diff(&t.m, &printed_transfer(t12, -r12, phi)) < 1e-12);
        }
    }

    #[test]
    fn forward_only_transfer_is_block_diagonal() {
        let s = build_two_port(0.8, 0.4).unwrap();
        let t = to_transfer(&s).unwrap();
        let fwd = s.forward_block();
        assert!((t.m[(0, 0)] - fwd[(0, 0)]).norm() < 1e-15);
        assert!((t.m[(0, 2)] - fwd[(0, 1)]).norm() < 1e-15);
        assert!((t.m[(2, 0)] - fwd[(1, 0)]).norm() < 1e-15);
        assert!((t.m[(2, 2)] - fwd[(1, 1)]).norm() < 1e-15);
        for (i, j) in [
            (0, 1),
            (0, 3),
            (1, 0),
            (1, 2),
            (2, 1),
            (2, 3),
            (3, 0),
            (3, 2),
        ] {
            assert_eq!(t.m[(i, j)].norm(), 0.0, "entry ({i},{j})");
        }
    }

    #[test]
    fn total_reflection_is_not_invertible() {
        let p = SimpleFourPortParams::new(0.0, 1.0, 0.0).unwrap();
        let err = to_transfer(&build_four_port(&p).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonInvertible { .. }));
    }

    #[test]
    fn transfer_round_trips_to_scatter() {
        let p = SimpleFourPortParams::new(0.4, 0.3, 0.9).unwrap();
        let s = build_four_port(&p).unwrap();
        let back = to_transfer(&s).unwrap().to_scatter().unwrap();
        assert!(max_diff(s.entries(), back.entries()) < 1e-14);
        assert!(!back.is_lossy() || back.loss_fraction() < 1e-14);
    }

    #[test]
    fn single_bead_fields() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let modes = ModePair::with_ratio(0.9).unwrap();
        let cfg = ChainConfig::identical(&p, 1, 0.0, modes).unwrap();
        let f = solve_chain(&cfg, &Injection::higher_mode()).unwrap();
        let b = &f.beads[0];
        assert!((b.c[0] - c(-0.54, 0.0)).norm() < 1e-14);
        assert!((b.c[1] - c(p.t(), 0.0)).norm() < 1e-14);
        assert!((b.b[0] - c(0.0, 0.12)).norm() < 1e-14);
        assert!(b.b[1].norm() < 1e-14);
        assert_eq!(f.segments.len(), 2);
    }

    #[test]
    fn forward_only_pair_matches_cascade() {
        let t = 0.95;
        let modes = ModePair::with_ratio(0.9).unwrap();
        let bead = build_two_port(t, 0.0).unwrap();
        let m2 = bead.forward_block();
        for &d in &[0.0, 1.3, 17.0, 40.0] {
            let cfg = ChainConfig::new(vec![bead, bead], vec![d], modes).unwrap();
            let f = solve_chain(&cfg, &Injection::higher_mode()).unwrap();
            let p = Mat2::from_diagonal(&Vector2::new(
                Complex64::from_polar(1.0, d),
                Complex64::from_polar(1.0, 0.9 * d),
            ));
            let out = m2 * p * m2 * Vector2::new(c(0.0, 0.0), c(1.0, 0.0));
            assert!((f.beads[1].c[0] - out[0]).norm() < 1e-13);
            assert!((f.beads[1].c[1] - out[1]).norm() < 1e-13);
            assert!(f
                .beads
                .iter()
                .all(|b| b.b[0].norm() + b.b[1].norm() < 1e-15));
        }
    }

    #[test]
    fn zero_gap_equals_composite_bead() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let modes = ModePair::with_ratio(0.9).unwrap();
        let bead = build_four_port(&p).unwrap();
        let pair = ChainConfig::new(vec![bead, bead], vec![0.0], modes).unwrap();
        let t = to_transfer(&bead).unwrap();
        let composite = t.then(&t).to_scatter().unwrap();
        let single = ChainConfig::single(composite, modes).unwrap();
        let inj = Injection::forward(c(0.3, 0.1), c(0.8, -0.2)).unwrap();
        let fp = solve_chain(&pair, &inj).unwrap();
        let fs = solve_chain(&single, &inj).unwrap();
        let (l, r) = (&fp.beads[0], &fp.beads[1]);
        let s = &fs.beads[0];
        for i in 0..2 {
            assert!((l.b[i] - s.b[i]).norm() < 1e-13);
            assert!((r.c[i] - s.c[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn oracle_without_reflection_needs_one_bounce() {
        let modes = ModePair::with_ratio(0.9).unwrap();
        let p = SimpleFourPortParams::new(0.31, 0.0, 0.0).unwrap();
        let cfg = ChainConfig::identical(&p, 2, 5.0, modes).unwrap();
        let inj = Injection::higher_mode();
        let s = fabry_perot_oracle(&cfg, &inj, 10).unwrap();
        assert_eq!(s.bounces, 1);
        let f = solve_chain(&cfg, &inj).unwrap();
        assert!(s.fields.max_difference(&f) < 1e-14);
    }

    #[test]
    fn oracle_agrees_for_reference_bead() {
        let modes = ModePair::with_ratio(0.9).unwrap();
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let cfg = ChainConfig::identical(&p, 2, 3.0, modes).unwrap();
        let inj = Injection::higher_mode();
        let s = fabry_perot_oracle(&cfg, &inj, 200).unwrap();
        let f = solve_chain(&cfg, &inj).unwrap();
        assert!(s.fields.max_difference(&f) < 1e-8);
    }

    #[test]
    fn oracle_converges_slowly_for_strong_reflection() {
        let modes = ModePair::with_ratio(0.9).unwrap();
        let p = SimpleFourPortParams::new(0.1, 0.9, 0.0).unwrap();
        let cfg = ChainConfig::identical(&p, 2, 3.0, modes).unwrap();
        let inj = Injection::higher_mode();
        let s = fabry_perot_oracle(&cfg, &inj, 10_000).unwrap();
        assert!(s.bounces > 100);
        let f = solve_chain(&cfg, &inj).unwrap();
        assert!(s.fields.max_difference(&f) < 1e-8);
        let err = fabry_perot_oracle(&cfg, &inj, 20).unwrap_err();
        assert!(matches!(err, Error::Divergence { bounces: 20, .. }));
    }

    #[test]
    fn oracle_requires_two_beads() {
        let modes = ModePair::with_ratio(0.9).unwrap();
        let p = SimpleFourPortParams::new(0.3, 0.1, 0.0).unwrap();
        let cfg = ChainConfig::identical(&p, 3, 1.0, modes).unwrap();
        assert!(fabry_perot_oracle(&cfg, &Injection::higher_mode(), 100).is_err());
    }

    #[test]
    fn config_validation() {
        let modes = ModePair::with_ratio(0.9).unwrap();
        let bead = ScatterMatrix::identity();
        assert!(ChainConfig::new(vec![], vec![], modes).is_err());
        assert!(ChainConfig::new(vec![bead, bead], vec![], modes).is_err());
        assert!(ChainConfig::new(vec![bead, bead], vec![-1.0], modes).is_err());
        let z = c(0.0, 0.0);
        assert!(Injection::new(z, z, z, z).is_err());
    }

    #[test]
    fn right_side_injection_mirrors_left() {
        // A single symmetric bead looks the same from both sides.
        let modes = ModePair::with_ratio(0.8).unwrap();
        let p = SimpleFourPortParams::new(0.4, 0.2, 0.5).unwrap();
        let cfg = ChainConfig::identical(&p, 1, 0.0, modes).unwrap();
        let z = c(0.0, 0.0);
        let left = solve_chain(&cfg, &Injection::new(z, c(1.0, 0.0), z, z).unwrap()).unwrap();
        let right = solve_chain(&cfg, &Injection::new(z, z, z, c(1.0, 0.0)).unwrap()).unwrap();
        let (l, r) = (&left.beads[0], &right.beads[0]);
        for i in 0..2 {
            assert!((l.c[i] - r.b[i]).norm() < 1e-14);
            assert!((l.b[i] - r.c[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn pair_solve_matches_general_solve() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.7).unwrap();
        let other = build_four_port(&SimpleFourPortParams::new(0.2, 0.4, -1.1).unwrap()).unwrap();
        let modes = ModePair::with_ratio(0.8).unwrap();
        let chain = PreparedChain::new(&[build_four_port(&p).unwrap(), other], modes).unwrap();
        let inj = Injection::new(c(0.3, 0.1), c(-0.5, 0.9), c(0.2, 0.0), c(0.0, -0.4)).unwrap();
        for d in [0.0, 0.37, 12.5, 301.0] {
            let full = chain.solve(&[d], &inj).unwrap();
            let pair = chain.solve_pair(d, &inj).unwrap();
            for (x, y) in full.beads.iter().zip(&pair) {
                for i in 0..2 {
                    assert!((x.a[i] - y.a[i]).norm() < 1e-13);
                    assert!((x.b[i] - y.b[i]).norm() < 1e-13);
                    assert!((x.c[i] - y.c[i]).norm() < 1e-13);
                    assert!((x.d[i] - y.d[i]).norm() < 1e-13);
                }
            }
        }
        assert!(chain.solve_pair(-1.0, &inj).is_err());
    }

    #[test]
    fn analytic_condition_number() {
        let m = Mat2::new(c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0));
        assert!((condition_number(&m) - 6.0).abs() < 1e-12);
        let m = Mat2::new(c(1.0, 2.0), c(0.3, -0.1), c(-0.7, 0.2), c(0.4, 0.4));
        let sv = m.singular_values();
        assert!((condition_number(&m) - sv.max() / sv.min()).abs() < 1e-10);
        let singular = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        assert!(condition_number(&singular).is_infinite());
    }

    fn random_params() -> impl Strategy<Value = SimpleFourPortParams> {
        (0.0..=0.95f64, 0.0..=0.3f64, -3.2..3.2f64).prop_map(|(t12, r12, phi)| {
            let t12 = t12.min((1.0 - r12 * r12).sqrt());
            SimpleFourPortParams::new(t12, r12, phi).unwrap()
        })
    }

    proptest! {
        #[test]
        fn global_phase_covariance(p in random_params(), d in 0.1..50.0f64, theta in -3.0..3.0f64) {
            let modes = ModePair::with_ratio(0.9).unwrap();
            let cfg = ChainConfig::identical(&p, 3, d, modes).unwrap();
            let inj = Injection::forward(c(0.6, 0.2), c(-0.3, 0.7)).unwrap();
            let rot = Complex64::from_polar(1.0, theta);
            let base = solve_chain(&cfg, &inj).unwrap();
            let turned = solve_chain(&cfg, &inj.scaled(rot)).unwrap();
            for (x, y) in base.segments.iter().zip(&turned.segments) {
                for k in 0..4 {
                    prop_assert!((x[k] * rot - y[k]).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn photon_number_is_conserved(p in random_params(), d in 0.0..50.0f64, n in 1usize..5) {
            let modes = ModePair::with_ratio(0.85).unwrap();
            let cfg = ChainConfig::identical(&p, n, d, modes).unwrap();
            let inj = Injection::forward(c(0.5, 0.0), c(0.1, 0.8)).unwrap();
            let f = solve_chain(&cfg, &inj).unwrap();
            for b in &f.beads {
                let pin = b.incoming_power();
                prop_assert!((b.outgoing_power() - pin).abs() <= 1e-10 * pin);
            }
            let first = &f.beads[0];
            let last = &f.beads[n - 1];
            let out = norm2(&first.b) + norm2(&last.c);
            prop_assert!((out - inj.power()).abs() <= 1e-10 * inj.power());
        }

        #[test]
        fn leading_gap_only_rotates_relative_phase(p in random_params(), d in 0.5..30.0f64, shift in 0.0..20.0f64) {
            let modes = ModePair::with_ratio(0.9).unwrap();
            let bead = build_four_port(&p).unwrap();
            let cfg = ChainConfig::new(vec![bead, bead], vec![d], modes).unwrap();
            // single-mode input: inserting free space before the chain changes nothing
            let ref_state = solve_chain(&cfg, &Injection::higher_mode()).unwrap();
            let spacer = ChainConfig::new(vec![ScatterMatrix::identity(), bead, bead], vec![shift, d], modes).unwrap();
            let shifted = solve_chain(&spacer, &Injection::higher_mode()).unwrap();
            for (x, y) in ref_state.beads.iter().zip(&shifted.beads[1..]) {
                for i in 0..2 {
                    prop_assert!((x.c[i].norm() - y.c[i].norm()).abs() < 1e-12);
                    prop_assert!((x.b[i].norm() - y.b[i].norm()).abs() < 1e-12);
                }
            }
            // two-mode input: equivalent to advancing the phases by k·Δ
            let inj = Injection::forward(c(0.6, 0.0), c(0.8, 0.0)).unwrap();
            let with_gap = solve_chain(&spacer, &inj).unwrap();
            let moved = Injection::forward(
                inj.a1 * Complex64::from_polar(1.0, shift),
                inj.a2 * Complex64::from_polar(1.0, 0.9 * shift),
            ).unwrap();
            let direct = solve_chain(&cfg, &moved).unwrap();
            for (x, y) in direct.beads.iter().zip(&with_gap.beads[1..]) {
                for i in 0..2 {
                    prop_assert!((x.c[i].norm() - y.c[i].norm()).abs() < 1e-12);
                    prop_assert!((x.a[i].norm() - y.a[i].norm()).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn forward_only_pair_is_beat_periodic(t in 0.3..1.0f64, d in 0.1..60.0f64) {
            let modes = ModePair::with_ratio(0.9).unwrap();
            let bead = build_two_port(t, 0.0).unwrap();
            let a = solve_chain(&ChainConfig::new(vec![bead, bead], vec![d], modes).unwrap(), &Injection::higher_mode()).unwrap();
            let b = solve_chain(&ChainConfig::new(vec![bead, bead], vec![d + modes.beat_period()], modes).unwrap(), &Injection::higher_mode()).unwrap();
            for (x, y) in a.beads.iter().zip(&b.beads) {
                for i in 0..2 {
                    prop_assert!((x.c[i].norm() - y.c[i].norm()).abs() < 1e-10);
                    prop_assert!((x.a[i].norm() - y.a[i].norm()).abs() < 1e-10);
                }
            }
        }
    }
}
