//! Per-bead scattering matrices and free propagation.
//!
//! All 4×4 matrices in this module act on amplitude vectors ordered as
//! (forward mode 1, forward mode 2, backward mode 1, backward mode 2). A bead
//! maps its incoming amplitudes `(A1, A2, D1, D2)` onto the outgoing
//! `(C1, C2, B1, B2)`: `A` arrives from the left, `D` from the right, `C`
//! leaves to the right and `B` leaves to the left.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub type Mat4 = Matrix4<Complex64>;
pub type Mat2 = Matrix2<Complex64>;

/// Tolerance on ‖M†M − I‖ for matrices supplied by the caller.
pub const INPUT_UNITARITY_TOL: f64 = 1e-10;
/// Tolerance on ‖M†M − I‖ for matrices assembled here.
pub const BUILD_UNITARITY_TOL: f64 = 1e-12;

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Longitudinal wavenumbers of the two guided modes.
///
/// `k1` belongs to the fundamental mode and must exceed `k2`. Lengths are
/// measured in units of `1/k1` throughout the crate, so `k1 = 1` is the
/// usual choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    pub k1: f64,
    pub k2: f64,
    #[serde(default = "unit_index")]
    pub n_medium: f64,
}

fn unit_index() -> f64 {
    1.0
}

impl ModePair {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let modes = Self {
            k1,
            k2,
            n_medium: 1.0,
        };
        modes.validate()?;
        Ok(modes)
    }

    /// Mode pair with `k1 = 1` and `k2 = ratio`.
    pub fn with_ratio(ratio: f64) -> Result<Self> {
        Self::new(1.0, ratio)
    }

    pub fn with_medium(mut self, n_medium: f64) -> Result<Self> {
        self.n_medium = n_medium;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k2 > 0.0 && self.k1 > self.k2 && self.k1.is_finite()) {
            return Err(domain(format!(
                "mode wavenumbers must satisfy k1 > k2 > 0 (got k1 = {}, k2 = {})",
                self.k1, self.k2
            )));
        }
        if !(self.n_medium > 0.0 && self.n_medium.is_finite()) {
            return Err(domain(format!(
                "medium index must be positive (got {})",
                self.n_medium
            )));
        }
        Ok(())
    }

    /// Distance over which the relative phase of the two forward modes
    /// advances by 2π.
    pub fn beat_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.k1 - self.k2)
    }

    /// Shortest interference period between counter-propagating modes,
    /// π/(k1 + k2).
    pub fn fast_period(&self) -> f64 {
        std::f64::consts::PI / (self.k1 + self.k2)
    }
}

/// Parameters of the symmetric bead with equal self-transmission `t` in both
/// modes, no same-mode reflection, cross transmission `t12` and cross
/// reflection `r12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleFourPortParams {
    pub t12: f64,
    pub r12: f64,
    #[serde(default)]
    pub phi: f64,
}

impl SimpleFourPortParams {
    pub fn new(t12: f64, r12: f64, phi: f64) -> Result<Self> {
        let p = Self { t12, r12, phi };
        p.validate()?;
        Ok(p)
    }

    /// Forward-only bead (`r12 = 0`) with self transmission `t`.
    pub fn forward_only(t: f64, phi: f64) -> Result<Self> {
        check_unit_interval("t", t)?;
        Self::new((1.0 - t * t).max(0.0).sqrt(), 0.0, phi)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_interval("t12", self.t12)?;
        check_unit_interval("r12", self.r12)?;
        if !self.phi.is_finite() {
            return Err(domain("phi must be finite"));
        }
        let s = self.t12 * self.t12 + self.r12 * self.r12;
        if s > 1.0 + 1e-15 {
            return Err(domain(format!(
                "t12^2 + r12^2 = {s} exceeds 1 (t12 = {}, r12 = {})",
                self.t12, self.r12
            )));
        }
        Ok(())
    }

    /// Self transmission t = √(1 − t12² − r12²).
    pub fn t(&self) -> f64 {
        (1.0 - self.t12 * self.t12 - self.r12 * self.r12)
            .max(0.0)
            .sqrt()
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1] (got {v})")))
    }
}

/// Amplitudes and phases of the most general symmetric four-port bead.
///
/// Index `[i][j]` holds the coefficient for scattering from mode `i + 1`
/// into mode `j + 1`; `phi` belongs to `t` and `psi` to `r`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeneralFourPortParams {
    pub t: [[f64; 2]; 2],
    pub r: [[f64; 2]; 2],
    pub phi: [[f64; 2]; 2],
    pub psi: [[f64; 2]; 2],
}

impl GeneralFourPortParams {
    /// The general parameter set that reproduces [`build_four_port`].
    pub fn from_simple(p: &SimpleFourPortParams) -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        let t = p.t();
        Self {
            t: [[t, p.t12], [p.t12, t]],
            r: [[0.0, p.r12], [p.r12, 0.0]],
            phi: [[0.0, p.phi], [PI - p.phi, 0.0]],
            psi: [[0.0, p.phi + FRAC_PI_2], [FRAC_PI_2 - p.phi, 0.0]],
        }
    }
}

/// A validated bead scattering matrix.
///
/// Unitary matrices carry `loss_fraction == 0`. Matrices accepted through
/// [`ScatterMatrix::lossy`] record the largest fractional power loss over
/// all input states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterMatrix {
    entries: Mat4,
    loss_fraction: f64,
}

impl ScatterMatrix {
    pub fn identity() -> Self {
        Self {
            entries: Mat4::identity(),
            loss_fraction: 0.0,
        }
    }

    /// Accepts `entries` if it is unitary within [`INPUT_UNITARITY_TOL`].
    pub fn from_unitary(entries: Mat4) -> Result<Self> {
        let dev = check_unitarity(&entries);
        if dev > INPUT_UNITARITY_TOL {
            return Err(domain(format!(
                "scattering matrix is not unitary (deviation {dev:.3e})"
            )));
        }
        Ok(Self {
            entries,
            loss_fraction: 0.0,
        })
    }

    /// Accepts a passive (possibly lossy) matrix and records its loss.
    pub fn lossy(entries: Mat4) -> Result<Self> {
        let gram = entries.adjoint() * entries;
        let eig = gram.symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        if max > 1.0 + INPUT_UNITARITY_TOL {
            return Err(domain(format!(
                "scattering matrix amplifies power (gain {max:.6})"
            )));
        }
        Ok(Self {
            entries,
            loss_fraction: (1.0 - min).max(0.0),
        })
    }

    pub(crate) fn from_built(entries: Mat4) -> Self {
        debug_assert!(check_unitarity(&entries) < BUILD_UNITARITY_TOL);
        Self {
            entries,
            loss_fraction: 0.0,
        }
    }

    pub fn entries(&self) -> &Mat4 {
        &self.entries
    }

    pub fn loss_fraction(&self) -> f64 {
        self.loss_fraction
    }

    pub fn is_lossy(&self) -> bool {
        self.loss_fraction > 0.0
    }

    /// Maps incoming `(A1, A2, D1, D2)` onto outgoing `(C1, C2, B1, B2)`.
    pub fn apply(&self, incoming: [Complex64; 4]) -> [Complex64; 4] {
        let v = self.entries * nalgebra::Vector4::from(incoming);
        [v[0], v[1], v[2], v[3]]
    }

    /// Forward transmission block (rows C, columns A).
    pub fn forward_block(&self) -> Mat2 {
        self.entries.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

/// Result of assembling the general four-port matrix before validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncheckedScatter {
    pub entries: Mat4,
    /// ‖M†M − I‖ measured as the largest entry magnitude.
    pub deviation: f64,
}

impl UncheckedScatter {
    pub fn into_unitary(self) -> Result<ScatterMatrix> {
        ScatterMatrix::from_unitary(self.entries)
    }

    pub fn into_lossy(self) -> Result<ScatterMatrix> {
        ScatterMatrix::lossy(self.entries)
    }
}

/// Forward-only bead coupling two co-propagating modes.
///
/// The cross amplitude is fixed by unitarity to √(1 − t²). The same 2×2
/// block acts on both propagation directions and reflections are zero.
pub fn build_two_port(t: f64, phi: f64) -> Result<ScatterMatrix> {
    check_unit_interval("t", t)?;
    if !phi.is_finite() {
        return Err(domain("phi must be finite"));
    }
    let s = ((1.0 - t) * (1.0 + t)).max(0.0).sqrt();
    let block = Mat2::new(
        Complex64::from(t),
        -cis(-phi) * s,
        cis(phi) * s,
        Complex64::from(t),
    );
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&block);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&block);
    Ok(ScatterMatrix::from_built(m))
}

/// Symmetric bead with cross transmission and cross reflection.
pub fn build_four_port(p: &SimpleFourPortParams) -> Result<ScatterMatrix> {
    p.validate()?;
    let t = Complex64::from(p.t());
    let z = Complex64::new(0.0, 0.0);
    let e = cis(p.phi);
    let em = cis(-p.phi);
    let ct = p.t12;
    let cr = p.r12;
    #[rustfmt::skip]
    let m = Mat4::new(
        t,            -em * ct,     z,            I * em * cr,
        e * ct,       t,            I * e * cr,   z,
        z,            I * em * cr,  t,            -em * ct,
        I * e * cr,   z,            e * ct,       t,
    );
    Ok(ScatterMatrix::from_built(m))
}

/// Assembles the general symmetric four-port matrix without enforcing
/// unitarity; the deviation is reported for the caller to act on.
pub fn build_general_four_port(p: &GeneralFourPortParams) -> UncheckedScatter {
    let mut m = Mat4::zeros();
    for out in 0..2 {
        for inp in 0..2 {
            let t = cis(p.phi[inp][out]) * p.t[inp][out];
            let r = cis(p.psi[inp][out]) * p.r[inp][out];
            m[(out, inp)] = t;
            m[(out + 2, inp + 2)] = t;
            m[(out, inp + 2)] = r;
            m[(out + 2, inp)] = r;
        }
    }
    UncheckedScatter {
        deviation: check_unitarity(&m),
        entries: m,
    }
}

/// ‖M†M − I‖ as the largest entry magnitude.
pub fn check_unitarity(m: &Mat4) -> f64 {
    let g = m.adjoint() * m - Mat4::identity();
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Free propagation over a gap, diagonal in the scattering basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    /// Phase factors for (forward 1, forward 2, backward 1, backward 2).
    pub phases: [Complex64; 4],
}

impl Propagation {
    pub fn to_matrix(&self) -> Mat4 {
        Mat4::from_diagonal(&nalgebra::Vector4::from(self.phases))
    }

    pub fn then(&self, other: &Propagation) -> Propagation {
        let mut phases = self.phases;
        for (p, q) in phases.iter_mut().zip(other.phases) {
            *p *= q;
        }
        Propagation { phases }
    }
}

/// diag(e^{ik1 d}, e^{ik2 d}, e^{-ik1 d}, e^{-ik2 d}).
pub fn propagation_matrix(d: f64, modes: &ModePair) -> Result<Propagation> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!(
            "propagation distance must be non-negative (got {d})"
        )));
    }
    Ok(Propagation {
        phases: [
            cis(modes.k1 * d),
            cis(modes.k2 * d),
            cis(-modes.k1 * d),
            cis(-modes.k2 * d),
        ],
    })
}
