//! Phase-screen transmission and first-order backscattering of a sphere.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::modes::{ModeSet, WaveguideSpec};
use crate::error::{domain, Result};

/// Index contrast above which the Born reflection estimate is flagged.
pub const CONTRAST_WARNING: f64 = 0.5;

/// Spherical bead at transverse position `center` (guide coordinates, [0,a]²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeadSpec {
    pub radius: f64,
    pub index: f64,
    pub center: (f64, f64),
}

impl BeadSpec {
    /// Bead on the guide axis.
    pub fn centered(radius: f64, index: f64, spec: &WaveguideSpec) -> Self {
        Self {
            radius,
            index,
            center: (0.5 * spec.a, 0.5 * spec.a),
        }
    }

    pub fn validate(&self, spec: &WaveguideSpec) -> Result<()> {
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(domain(format!(
                "bead radius must be non-negative (got {})",
                self.radius
            )));
        }
        if !(self.index > 0.0 && self.index.is_finite()) {
            return Err(domain(format!(
                "bead index must be positive (got {})",
                self.index
            )));
        }
        let (x, y) = self.center;
        let fits = |c: f64| c - self.radius >= 0.0 && c + self.radius <= spec.a;
        if !(fits(x) && fits(y)) {
            return Err(domain(format!(
                "bead of radius {} at ({x}, {y}) does not fit inside a guide of side {}",
                self.radius, spec.a
            )));
        }
        Ok(())
    }

    pub fn contrast(&self, n0: f64) -> f64 {
        self.index * self.index - n0 * n0
    }

    /// Chord length through the sphere along the guide axis.
    pub fn chord(&self, x: f64, y: f64) -> f64 {
        let rho2 = (x - self.center.0).powi(2) + (y - self.center.1).powi(2);
        let r2 = self.radius * self.radius;
        if rho2 >= r2 {
            0.0
        } else {
            2.0 * (r2 - rho2).sqrt()
        }
    }
}

/// Phase picked up by a paraxial field crossing the bead at (x, y).
pub fn accumulated_phase(bead: &BeadSpec, spec: &WaveguideSpec, x: f64, y: f64) -> f64 {
    phase_per_length(bead, spec) * bead.chord(x, y)
}

fn phase_per_length(bead: &BeadSpec, spec: &WaveguideSpec) -> f64 {
    spec.k0 / (2.0 * spec.n0) * bead.contrast(spec.n0)
}

/// Quadrature over the bead's shadow disk: Gauss–Legendre in the polar
/// angle α (ρ = R sin α, which absorbs the chord's square root) and an
/// equispaced midpoint rule in θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskQuadrature {
    pub radial: usize,
    pub angular: usize,
}

impl Default for DiskQuadrature {
    fn default() -> Self {
        Self {
            radial: 64,
            angular: 128,
        }
    }
}

impl DiskQuadrature {
    pub fn doubled(&self) -> Self {
        Self {
            radial: 2 * self.radial,
            angular: 2 * self.angular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial < 2 || self.angular < 4 || !self.angular.is_multiple_of(2) {
            return Err(domain(format!(
                "quadrature needs radial >= 2 and an even angular count >= 4 (got {}, {})",
                self.radial, self.angular
            )));
        }
        Ok(())
    }

    /// Nodes (x, y, chord, weight) over the disk.
    fn nodes(&self, bead: &BeadSpec) -> Vec<(f64, f64, f64, f64)> {
        let r = bead.radius;
        let (gx, gw) = gauss_legendre(self.radial);
        let dtheta = 2.0 * PI / self.angular as f64;
        let mut out = Vec::with_capacity(self.radial * self.angular);
        for (&xi, &wi) in gx.iter().zip(&gw) {
            let alpha = 0.25 * PI * (xi + 1.0);
            let (s, c) = alpha.sin_cos();
            let rho = r * s;
            // ρ dρ = R² sin α cos α dα, dα = (π/4) dξ
            let w_rad = wi * 0.25 * PI * r * r * s * c;
            for k in 0..self.angular {
                let theta = dtheta * (k as f64 + 0.5);
                let (st, ct) = theta.sin_cos();
                out.push((
                    bead.center.0 + rho * ct,
                    bead.center.1 + rho * st,
                    2.0 * r * c,
                    w_rad * dtheta,
                ));
            }
        }
        out
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// t_mn = ⟨u_m| e^{iφ} |u_n⟩. Only the bead shadow differs from the
/// identity, so the deviation is integrated over the disk alone.
pub fn transmission_coeffs(
    bead: &BeadSpec,
    spec: &WaveguideSpec,
    modes: &ModeSet,
    quad: &DiskQuadrature,
) -> Result<DMatrix<Complex64>> {
    bead.validate(spec)?;
    quad.validate()?;
    let n = modes.len();
    let mut t = DMatrix::<Complex64>::identity(n, n);
    if bead.radius == 0.0 {
        return Ok(t);
    }
    let kappa = phase_per_length(bead, spec);
    let mut u = vec![0.0; n];
    for (x, y, chord, w) in quad.nodes(bead) {
        modes.values_at(x, y, &mut u);
        let f = (Complex64::i() * kappa * chord).exp() - 1.0;
        let fw = f * w;
        for p in 0..n {
            for q in p..n {
                t[(p, q)] += fw * (u[p] * u[q]);
            }
        }
    }
    symmetrize(&mut t);
    Ok(t)
}

/// First-order backscattering into mode m from mode n, with the axial
/// integral over each chord done in closed form.
pub fn reflection_coeffs(
    bead: &BeadSpec,
    spec: &WaveguideSpec,
    modes: &ModeSet,
    quad: &DiskQuadrature,
) -> Result<DMatrix<Complex64>> {
    bead.validate(spec)?;
    quad.validate()?;
    let n = modes.len();
    let mut r = DMatrix::<Complex64>::zeros(n, n);
    let contrast = bead.contrast(spec.n0);
    if bead.radius == 0.0 || contrast == 0.0 {
        return Ok(r);
    }
    let pref = Complex64::new(0.0, spec.k0 / (2.0 * spec.n0) * contrast);
    let mut u = vec![0.0; n];
    for (x, y, chord, w) in quad.nodes(bead) {
        modes.values_at(x, y, &mut u);
        for p in 0..n {
            for q in p..n {
                let qz = modes.modes[p].beta + modes.modes[q].beta;
                let axial = 2.0 * (0.5 * qz * chord).sin() / qz;
                r[(p, q)] += pref * (w * u[p] * u[q] * axial);
            }
        }
    }
    symmetrize(&mut r);
    Ok(r)
}

fn symmetrize(m: &mut DMatrix<Complex64>) {
    for p in 0..m.nrows() {
        for q in 0..p {
            m[(p, q)] = m[(q, p)];
        }
    }
}

/// Sample of the fields along a horizontal cut through the guide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub x: f64,
    pub phase: f64,
    /// Input mode after the phase screen.
    pub distorted: Complex64,
    /// Local backscattered amplitude of the input mode (Born integrand
    /// integrated along the chord).
    pub reflected: Complex64,
}

/// Distorted and reflected profiles of mode `input` along y = `y`.
pub fn profile_cut(
    bead: &BeadSpec,
    spec: &WaveguideSpec,
    modes: &ModeSet,
    input: usize,
    y: f64,
    samples: usize,
) -> Result<Vec<ProfileSample>> {
    bead.validate(spec)?;
    if input >= modes.len() {
        return Err(domain(format!("input mode index {input} out of range")));
    }
    if samples < 2 {
        return Err(domain("a profile needs at least two samples"));
    }
    let beta = modes.modes[input].beta;
    let pref = spec.k0 / (2.0 * spec.n0) * bead.contrast(spec.n0);
    Ok((0..samples)
        .map(|i| {
            let x = spec.a * i as f64 / (samples - 1) as f64;
            let phase = accumulated_phase(bead, spec, x, y);
            let u = modes.value(input, x, y);
            let chord = bead.chord(x, y);
            let axial = if chord > 0.0 {
                2.0 * (beta * chord).sin() / (2.0 * beta)
            } else {
                0.0
            };
            ProfileSample {
                x,
                phase,
                distorted: Complex64::from_polar(u, phase),
                reflected: Complex64::new(0.0, pref * u * axial),
            }
        })
        .collect())
}
