//! Hard-wall square waveguide modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Square waveguide of side `a` (in vacuum wavelengths) filled with index `n0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    pub a: f64,
    #[serde(default = "default_n0")]
    pub n0: f64,
    #[serde(default = "default_k0")]
    pub k0: f64,
    /// Transverse orders (m_x, m_y) retained in the projection.
    #[serde(default = "default_orders")]
    pub mode_orders: Vec<(u32, u32)>,
}

fn default_n0() -> f64 {
    1.0
}

fn default_k0() -> f64 {
    2.0 * PI
}

/// m_x = 1..=7 with the fundamental vertical profile.
pub fn default_orders() -> Vec<(u32, u32)> {
    (1..=7).map(|m| (m, 1)).collect()
}

impl WaveguideSpec {
    pub fn new(a: f64, n0: f64) -> Self {
        Self {
            a,
            n0,
            k0: default_k0(),
            mode_orders: default_orders(),
        }
    }

    pub fn with_orders(mut self, orders: Vec<(u32, u32)>) -> Self {
        self.mode_orders = orders;
        self
    }

    /// Propagation constant of order (mx, my), `None` when not guided.
    pub fn beta(&self, mx: u32, my: u32) -> Option<f64> {
        let kx = mx as f64 * PI / self.a;
        let ky = my as f64 * PI / self.a;
        let b2 = (self.n0 * self.k0).powi(2) - kx * kx - ky * ky;
        (b2 > 0.0).then(|| b2.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let wavelength = 2.0 * PI / self.k0;
        if !(self.k0 > 0.0 && self.k0.is_finite()) {
            return Err(domain(format!("k0 must be positive (got {})", self.k0)));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(domain(format!("n0 must be positive (got {})", self.n0)));
        }
        if !(self.a > 0.5 * wavelength && self.a.is_finite()) {
            return Err(domain(format!(
                "waveguide side {} must exceed half a wavelength",
                self.a
            )));
        }
        if self.mode_orders.is_empty() {
            return Err(domain("no transverse mode orders requested"));
        }
        Ok(())
    }
}

/// One separable mode u = (2/a) sin(m_x π x/a) sin(m_y π y/a).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub mx: u32,
    pub my: u32,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub a: f64,
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, mx: u32, my: u32) -> Option<usize> {
        self.modes.iter().position(|m| m.mx == mx && m.my == my)
    }

    pub fn value(&self, i: usize, x: f64, y: f64) -> f64 {
        let m = &self.modes[i];
        let a = self.a;
        (2.0 / a) * (m.mx as f64 * PI * x / a).sin() * (m.my as f64 * PI * y / a).sin()
    }

    /// All mode values at one transverse point.
    pub fn values_at(&self, x: f64, y: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.value(i, x, y);
        }
    }
}

/// Guided modes for the requested orders. Fails if any requested order is
/// cut off.
pub fn guided_modes(spec: &WaveguideSpec) -> Result<ModeSet> {
    spec.validate()?;
    let modes = spec
        .mode_orders
        .iter()
        .map(|&(mx, my)| {
            if mx == 0 || my == 0 {
                return Err(domain(format!("mode order ({mx}, {my}) must be positive")));
            }
            spec.beta(mx, my)
                .map(|beta| Mode { mx, my, beta })
                .ok_or_else(|| {
                    domain(format!(
                        "mode ({mx}, {my}) is not guided for a = {}",
                        spec.a
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeSet { a: spec.a, modes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_dispersion() {
        let spec = WaveguideSpec::new(5.0, 1.0).with_orders(vec![(1, 1)]);
        let set = guided_modes(&spec).unwrap();
        let k0 = 2.0 * PI;
        let expected = (k0 * k0 - 2.0 * (PI / 5.0).powi(2)).sqrt();
        assert!((set.modes[0].beta - expected).abs() < 1e-14);
    }

    #[test]
    fn lowest_symmetric_modes_guided_at_nine_wavelengths() {
        let spec = WaveguideSpec::new(9.0, 1.0).with_orders(vec![(1, 1), (3, 1), (5, 1)]);
        assert_eq!(guided_modes(&spec).unwrap().len(), 3);
    }

    #[test]
    fn orthonormal_on_midpoint_grid() {
        let spec = WaveguideSpec::new(5.0, 1.0).with_orders(vec![(1, 1), (2, 1), (3, 1), (1, 2)]);
        let set = guided_modes(&spec).unwrap();
        let n = 400;
        let h = spec.a / n as f64;
        let mut gram = [[0.0; 4]; 4];
        let mut v = [0.0; 4];
        for i in 0..n {
            for j in 0..n {
                set.values_at((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, &mut v);
                for p in 0..4 {
                    for q in 0..4 {
                        gram[p][q] += v[p] * v[q] * h * h;
                    }
                }
            }
        }
        for (p, row) in gram.iter().enumerate() {
            for (q, g) in row.iter().enumerate() {
                let e = if p == q { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-8, "{p} {q} {g}");
            }
        }
    }

    #[test]
    fn rejects_cut_off_guides() {
        assert!(guided_modes(&WaveguideSpec::new(0.5, 1.0)).is_err());
        // (1,1) needs a > λ/√2
        let spec = WaveguideSpec::new(0.6, 1.0).with_orders(vec![(1, 1)]);
        assert!(guided_modes(&spec).is_err());
        let spec = WaveguideSpec::new(2.0, 1.0).with_orders(vec![(7, 1)]);
        assert!(guided_modes(&spec).is_err());
    }
}
