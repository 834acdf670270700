//! Paraxial estimate of the coupling coefficients of a dielectric sphere in
//! a square hard-wall waveguide.
//!
//! Transmission is modelled as a thin phase screen whose phase follows the
//! optical path through the sphere; reflection as first-order
//! backscattering. Both are projected onto the guided modes. Lengths are in
//! vacuum wavelengths.

mod coupling;
mod modes;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use coupling::{
    accumulated_phase, gauss_legendre, profile_cut, reflection_coeffs, transmission_coeffs,
    BeadSpec, DiskQuadrature, ProfileSample, CONTRAST_WARNING,
};
pub use modes::{default_orders, guided_modes, Mode, ModeSet, WaveguideSpec};

use crate::error::{domain, Error, Result};
use crate::scatter::SimpleFourPortParams;

/// Loss above which the two-mode description is rejected.
pub const MAX_MODEL_LOSS: f64 = 0.5;
/// Largest change of any coefficient under doubled resolution.
pub const RESOLUTION_TOLERANCE: f64 = 1e-6;

/// Projected coupling of one bead.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingEstimate {
    pub modes: Vec<Mode>,
    pub t_matrix: DMatrix<Complex64>,
    pub r_matrix: DMatrix<Complex64>,
    /// Indices into `modes` of the (fundamental, higher) pair used by the
    /// two-mode force model.
    pub target: (usize, usize),
    /// 1 − |t_pp|² − |t_pq|² − |r_pq|², clamped to [0, 1].
    pub loss_fraction: f64,
    /// Index contrast exceeds the range where the reflection estimate holds.
    pub contrast_warning: bool,
}

impl CouplingEstimate {
    pub fn from_matrices(
        modes: Vec<Mode>,
        t_matrix: DMatrix<Complex64>,
        r_matrix: DMatrix<Complex64>,
        target: (usize, usize),
    ) -> Result<Self> {
        let n = modes.len();
        if t_matrix.shape() != (n, n) || r_matrix.shape() != (n, n) {
            return Err(domain(
                "coupling matrices must be square over the retained modes",
            ));
        }
        if target.0 >= n || target.1 >= n || target.0 == target.1 {
            return Err(domain(format!("invalid target mode pair {target:?}")));
        }
        let (p, q) = target;
        let kept =
            t_matrix[(p, p)].norm_sqr() + t_matrix[(p, q)].norm_sqr() + r_matrix[(p, q)].norm_sqr();
        Ok(Self {
            modes,
            t_matrix,
            r_matrix,
            target,
            loss_fraction: (1.0 - kept).clamp(0.0, 1.0),
            contrast_warning: false,
        })
    }

    pub fn t(&self, m: usize, n: usize) -> Complex64 {
        self.t_matrix[(m, n)]
    }

    pub fn r(&self, m: usize, n: usize) -> Complex64 {
        self.r_matrix[(m, n)]
    }

    /// Row sums Σ_n |t_mn|² + |r_mn|² for each input mode.
    pub fn retained_power(&self) -> Vec<f64> {
        (0..self.modes.len())
            .map(|m| {
                self.t_matrix
                    .row(m)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    + self
                        .r_matrix
                        .row(m)
                        .iter()
                        .map(|z| z.norm_sqr())
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Transmission and reflection matrices of `bead`, with the mode pair
/// `target` given as transverse orders. Fails if doubling the quadrature
/// changes any coefficient by more than [`RESOLUTION_TOLERANCE`].
pub fn estimate_coupling(
    bead: &BeadSpec,
    spec: &WaveguideSpec,
    target: ((u32, u32), (u32, u32)),
    quad: &DiskQuadrature,
) -> Result<CouplingEstimate> {
    let set = guided_modes(spec)?;
    let find = |(mx, my): (u32, u32)| {
        set.index_of(mx, my).ok_or_else(|| {
            domain(format!(
                "target mode ({mx}, {my}) is not among the retained modes"
            ))
        })
    };
    let pair = (find(target.0)?, find(target.1)?);
    let t = transmission_coeffs(bead, spec, &set, quad)?;
    let r = reflection_coeffs(bead, spec, &set, quad)?;
    let fine = quad.doubled();
    let change = (&t - transmission_coeffs(bead, spec, &set, &fine)?)
        .camax()
        .max((&r - reflection_coeffs(bead, spec, &set, &fine)?).camax());
    if change > RESOLUTION_TOLERANCE {
        return Err(Error::Resolution { change });
    }
    let mut est = CouplingEstimate::from_matrices(set.modes, t, r, pair)?;
    est.contrast_warning = (bead.index - spec.n0).abs() > CONTRAST_WARNING;
    Ok(est)
}

/// Two-mode parameters extracted from an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterParamsReport {
    pub params: SimpleFourPortParams,
    /// |t_pp| after any renormalisation.
    pub t: f64,
    /// Loss of the extracted model (0 when renormalised).
    pub loss_fraction: f64,
    /// Loss before renormalisation.
    pub raw_loss_fraction: f64,
    pub renormalized: bool,
}

/// Reads t = |t_pp|, t12 = |t_pq|, r12 = |r_pq| and φ = arg t_pq − arg t_pp.
/// With `renormalize` the three amplitudes are scaled by 1/√(1 − loss) so
/// the two-mode model is lossless.
pub fn to_scatter_params(est: &CouplingEstimate, renormalize: bool) -> Result<ScatterParamsReport> {
    let (p, q) = est.target;
    let tpp = est.t_matrix[(p, p)];
    let tpq = est.t_matrix[(p, q)];
    let (t, t12, r12) = (tpp.norm(), tpq.norm(), est.r_matrix[(p, q)].norm());
    let loss = (1.0 - t * t - t12 * t12 - r12 * r12).max(0.0);
    if loss > MAX_MODEL_LOSS {
        return Err(Error::ModelInvalid { loss });
    }
    let phi = if tpq.norm() > 0.0 && tpp.norm() > 0.0 {
        let d = tpq.arg() - tpp.arg();
        d.sin().atan2(d.cos())
    } else {
        0.0
    };
    let scale = if renormalize {
        1.0 / (1.0 - loss).sqrt()
    } else {
        1.0
    };
    let (t, t12, r12) = (t * scale, t12 * scale, r12 * scale);
    // guard the unit circle against rounding after rescaling
    let norm = (t12 * t12 + r12 * r12).sqrt();
    let (t12, r12) = if norm > 1.0 {
        (t12 / norm, r12 / norm)
    } else {
        (t12, r12)
    };
    Ok(ScatterParamsReport {
        params: SimpleFourPortParams::new(t12, r12, phi)?,
        t,
        loss_fraction: if renormalize { 0.0 } else { loss },
        raw_loss_fraction: loss,
        renormalized: renormalize,
    })
}
