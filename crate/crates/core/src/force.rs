//! Optical forces from photon-momentum balance.
//!
//! A photon in mode `i` carries momentum ħk_i along the guide. The force on
//! a bead is the momentum flowing in minus the momentum flowing out:
//!
//! F ∝ k1(|A1|² + |B1|² − |C1|² − |D1|²) + k2(|A2|² + |B2|² − |C2|² − |D2|²).
//!
//! Forces are reported in units of (c n ε0 ħ k1 / 2) times the injected
//! power, so they are dimensionless and independent of the medium index.
//! Positive values push along the injection direction, negative values are
//! tractor forces.

use num_complex::Complex64;

use crate::chain::{BeadFields, FieldState, Injection};
use crate::error::{domain, Result};
use crate::scatter::{ModePair, SimpleFourPortParams};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Momentum balance at one bead in units of k1, before normalisation by the
/// injected power.
pub fn particle_force(fields: &BeadFields, modes: &ModePair) -> f64 {
    let balance = |i: usize| {
        fields.a[i].norm_sqr() + fields.b[i].norm_sqr()
            - fields.c[i].norm_sqr()
            - fields.d[i].norm_sqr()
    };
    (modes.k1 * balance(0) + modes.k2 * balance(1)) / modes.k1
}

/// Normalised forces on all beads of a solved chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceResult {
    pub forces: Vec<f64>,
    /// Momentum entering at the left end minus momentum leaving at the
    /// right end, in the same units.
    pub total_flux_balance: f64,
}

impl ForceResult {
    pub fn sum(&self) -> f64 {
        self.forces.iter().sum()
    }
}

pub fn chain_forces(fields: &FieldState, modes: &ModePair, inj: &Injection) -> ForceResult {
    let norm = inj.power();
    let forces = fields
        .beads
        .iter()
        .map(|b| particle_force(b, modes) / norm)
        .collect();
    let flux = |seg: &[Complex64; 4]| {
        modes.k1 * (seg[0].norm_sqr() + seg[2].norm_sqr())
            + modes.k2 * (seg[1].norm_sqr() + seg[3].norm_sqr())
    };
    let left = flux(&fields.segments[0]);
    let right = flux(fields.segments.last().expect("at least one segment"));
    ForceResult {
        forces,
        total_flux_balance: (left - right) / (modes.k1 * norm),
    }
}

/// Closed-form force on one forward-only bead with self transmission `t`.
///
/// This is the expression obtained with the output amplitudes
/// `C1 = t A1 + e^{iφ}√(1−t²) A2`, `C2 = −e^{−iφ}√(1−t²) A1 + t A2`,
/// which equals [`crate::scatter::build_two_port`] evaluated at phase `π − φ`.
/// The two conventions agree whenever only one mode is injected.
pub fn closed_form_2p(
    t: f64,
    phi: f64,
    a1: Complex64,
    a2: Complex64,
    modes: &ModePair,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("t must lie in [0, 1] (got {t})")));
    }
    let s = (1.0 - t * t).sqrt();
    let interference = 2.0 * (Complex64::from_polar(1.0, phi) * a1.conj() * a2).re;
    let bracket = (t * t - 1.0) * (a1.norm_sqr() - a2.norm_sqr()) + t * s * interference;
    Ok((modes.k2 - modes.k1) * bracket / modes.k1)
}

/// Closed-form force on one symmetric four-port bead.
pub fn closed_form_4p(
    p: &SimpleFourPortParams,
    a1: Complex64,
    a2: Complex64,
    modes: &ModePair,
) -> Result<f64> {
    p.validate()?;
    let (k1, k2) = (modes.k1, modes.k2);
    let tt = p.t12 * p.t12;
    let rr = p.r12 * p.r12;
    let interference = 2.0 * (a1 * a2.conj() * Complex64::from_polar(1.0, p.phi)).re;
    let f = a1.norm_sqr() * (k1 * (rr + tt) + k2 * (rr - tt))
        + a2.norm_sqr() * (k1 * (rr - tt) + k2 * (rr + tt))
        + p.t12 * p.t() * (k1 - k2) * interference;
    Ok(f / k1)
}

/// Largest r12²/t12² for which a single bead fed through the higher mode
/// still feels a tractor force: (k1 − k2)/(k1 + k2).
pub fn tractor_threshold(modes: &ModePair) -> f64 {
    (modes.k1 - modes.k2) / (modes.k1 + modes.k2)
}

/// Converts a normalised force into newtons.
///
/// `power` is the injected power in watts and `effective_index` is k1/k0,
/// the effective index of the fundamental mode; the Minkowski momentum
/// flux of that power is `power · effective_index / c`.
pub fn force_in_newtons(normalized: f64, power: f64, effective_index: f64) -> f64 {
    normalized * power * effective_index / SPEED_OF_LIGHT
}
