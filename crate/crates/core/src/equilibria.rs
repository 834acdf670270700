//! Two-bead optical binding: equal-force distances, their stability, and
//! parameter scans for collectively bound tractor configurations.
//!
//! With the first bead at the upstream end, the separation `d` grows when
//! the first bead is pushed harder than the second, so an equilibrium `d*`
//! of `g(d) = F1(d) − F2(d)` is restoring when `g'(d*) > 0`.

use rayon::prelude::*;

use crate::chain::{Injection, PreparedChain};
use crate::error::{domain, Result};
use crate::force::particle_force;
use crate::scatter::{
    build_four_port, build_two_port, ModePair, ScatterMatrix, SimpleFourPortParams,
};

/// Central-difference step for force derivatives, in units of 1/k1.
pub const DERIVATIVE_STEP: f64 = 1e-4;
/// Target |F1 − F2| at a refined root.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// Roots closer than this (units of 1/k1) are merged.
pub const MERGE_DISTANCE: f64 = 1e-6;
/// Samples per beat period on the default grid.
pub const SAMPLES_PER_BEAT: f64 = 4000.0;
/// Minimum samples per fast (counter-propagating) interference period.
pub const SAMPLES_PER_FAST_PERIOD: f64 = 40.0;

/// Closed range of bead separations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRange {
    pub start: f64,
    pub end: f64,
}

impl DistanceRange {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start > 0.0 && end > start && end.is_finite()) {
            return Err(domain(format!(
                "distance range must satisfy 0 < start < end (got {start}..{end})"
            )));
        }
        Ok(Self { start, end })
    }

    /// (0.05/k1, two beat periods].
    pub fn default_for(modes: &ModePair) -> Self {
        Self {
            start: 0.05 / modes.k1,
            end: 2.0 * modes.beat_period(),
        }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Sample count resolving both the beat and the fast interference scale.
    pub fn default_samples(&self, modes: &ModePair) -> usize {
        let per_beat = SAMPLES_PER_BEAT * self.len() / modes.beat_period();
        let per_fast = SAMPLES_PER_FAST_PERIOD * self.len() / modes.fast_period();
        per_beat.max(per_fast).ceil().max(2.0) as usize
    }

    fn grid(&self, samples: usize) -> impl Iterator<Item = f64> + '_ {
        let step = self.len() / (samples - 1) as f64;
        (0..samples).map(move |i| {
            if i + 1 == samples {
                self.end
            } else {
                self.start + step * i as f64
            }
        })
    }
}

/// Two beads fed from the left, parametrised by their separation.
#[derive(Debug, Clone)]
pub struct TwoBeadSystem {
    chain: PreparedChain,
    injection: Injection,
}

impl TwoBeadSystem {
    pub fn new(
        first: ScatterMatrix,
        second: ScatterMatrix,
        modes: ModePair,
        injection: Injection,
    ) -> Result<Self> {
        injection.validate()?;
        Ok(Self {
            chain: PreparedChain::new(&[first, second], modes)?,
            injection,
        })
    }

    /// Two identical symmetric beads.
    pub fn identical(
        p: &SimpleFourPortParams,
        modes: ModePair,
        injection: Injection,
    ) -> Result<Self> {
        let bead = build_four_port(p)?;
        Self::new(bead, bead, modes, injection)
    }

    pub fn modes(&self) -> &ModePair {
        self.chain.modes()
    }

    /// Normalised forces (F1, F2) at separation `d`.
    pub fn forces(&self, d: f64) -> Result<(f64, f64)> {
        let [b1, b2] = self.chain.solve_pair(d, &self.injection)?;
        let modes = self.chain.modes();
        let norm = self.injection.power();
        Ok((
            particle_force(&b1, modes) / norm,
            particle_force(&b2, modes) / norm,
        ))
    }

    fn imbalance(&self, d: f64) -> Result<f64> {
        self.forces(d).map(|(f1, f2)| f1 - f2)
    }
}

/// One row of a force-versus-distance table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample {
    pub d: f64,
    pub f1: f64,
    pub f2: f64,
}

pub fn force_vs_distance(
    system: &TwoBeadSystem,
    range: DistanceRange,
    samples: usize,
) -> Result<Vec<ForceSample>> {
    if samples < 2 {
        return Err(domain("at least two samples are required"));
    }
    range
        .grid(samples)
        .map(|d| system.forces(d).map(|(f1, f2)| ForceSample { d, f1, f2 }))
        .collect()
}

/// An equal-force separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub d_star: f64,
    /// Force shared by both beads at `d_star`.
    pub f_common: f64,
    pub stable: bool,
    pub df1_dd: f64,
    pub df2_dd: f64,
}

impl EquilibriumPoint {
    pub fn is_stable_tractor(&self) -> bool {
        self.stable && self.f_common < 0.0
    }
}

/// Locates every sign change of F1 − F2 on the sampling grid, refines it by
/// bisection and classifies its stability.
///
/// A curve with |F1 − F2| below the root tolerance everywhere (transparent
/// beads) has no isolated roots and yields an empty list.
pub fn find_equilibria(
    system: &TwoBeadSystem,
    range: DistanceRange,
    samples: Option<usize>,
) -> Result<Vec<EquilibriumPoint>> {
    let samples = samples.unwrap_or_else(|| range.default_samples(system.modes()));
    if samples < 2 {
        return Err(domain("at least two samples are required"));
    }
    let grid: Vec<(f64, f64)> = range
        .grid(samples)
        .map(|d| system.imbalance(d).map(|g| (d, g)))
        .collect::<Result<_>>()?;

    if grid.iter().all(|&(_, g)| g.abs() < ROOT_TOLERANCE) {
        return Ok(Vec::new());
    }

    let mut roots: Vec<f64> = Vec::new();
    for (i, w) in grid.windows(2).enumerate() {
        let (lo, glo) = w[0];
        let (hi, ghi) = w[1];
        let root = if glo * ghi < 0.0 {
            Some(bisect(system, lo, glo, hi)?)
        } else if ghi == 0.0 && glo != 0.0 {
            // exact zero on a grid node: a root only if the sign flips across it
            match grid.get(i + 2) {
                Some(&(_, gnext)) if gnext * glo < 0.0 => Some(hi),
                _ => None,
            }
        } else {
            None
        };
        if let Some(r) = root {
            if roots.last().is_none_or(|&prev| r - prev > MERGE_DISTANCE) {
                roots.push(r);
            }
        }
    }

    roots.into_iter().map(|d| classify(system, d)).collect()
}

fn bisect(system: &TwoBeadSystem, mut lo: f64, mut glo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let g = system.imbalance(mid)?;
        if g.abs() < ROOT_TOLERANCE {
            return Ok(mid);
        }
        if g * glo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = g;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn classify(system: &TwoBeadSystem, d: f64) -> Result<EquilibriumPoint> {
    let h = DERIVATIVE_STEP / system.modes().k1;
    let (f1, f2) = system.forces(d)?;
    let (f1p, f2p) = system.forces(d + h)?;
    let (f1m, f2m) = system.forces((d - h).max(0.0))?;
    let span = d + h - (d - h).max(0.0);
    let df1 = (f1p - f1m) / span;
    let df2 = (f2p - f2m) / span;
    Ok(EquilibriumPoint {
        d_star: d,
        f_common: 0.5 * (f1 + f2),
        stable: df1 - df2 > 0.0,
        df1_dd: df1,
        df2_dd: df2,
    })
}

/// Stable tractor separations for one transmission value.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingRow {
    pub t: f64,
    pub distances: Vec<f64>,
}

/// Forward-only beads (no reflection) with self transmission `t`.
pub fn forward_only_system(
    t: f64,
    phi: f64,
    modes: ModePair,
    injection: Injection,
) -> Result<TwoBeadSystem> {
    let bead = build_two_port(t, phi)?;
    TwoBeadSystem::new(bead, bead, modes, injection)
}

/// Stable tractor separations of two forward-only beads as a function of
/// their transmission.
pub fn binding_distance_curve(
    t_values: &[f64],
    phi: f64,
    modes: ModePair,
    injection: Injection,
    range: Option<DistanceRange>,
) -> Result<Vec<BindingRow>> {
    let range = range.unwrap_or_else(|| DistanceRange::default_for(&modes));
    t_values
        .par_iter()
        .map(|&t| {
            let system = forward_only_system(t, phi, modes, injection)?;
            let distances = find_equilibria(&system, range, None)?
                .into_iter()
                .filter(EquilibriumPoint::is_stable_tractor)
                .map(|e| e.d_star)
                .collect();
            Ok(BindingRow { t, distances })
        })
        .collect()
}

/// Smallest transmission for which two forward-only beads have a stable
/// tractor configuration, located by bisection on `[lo, hi]` to within
/// `tol`. `None` if `hi` itself has no such configuration.
pub fn tractor_cutoff(
    phi: f64,
    modes: ModePair,
    injection: Injection,
    range: Option<DistanceRange>,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
) -> Result<Option<f64>> {
    let range = range.unwrap_or_else(|| DistanceRange::default_for(&modes));
    let feasible = |t: f64| -> Result<bool> {
        let system = forward_only_system(t, phi, modes, injection)?;
        Ok(find_equilibria(&system, range, None)?
            .iter()
            .any(EquilibriumPoint::is_stable_tractor))
    };
    if !feasible(hi)? {
        return Ok(None);
    }
    if feasible(lo)? {
        return Ok(Some(lo));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Evenly spaced axis including both ends.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

/// Outcome for one (t12, r12) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellStatus {
    /// t12² + r12² > 1.
    Infeasible,
    /// No stable equilibrium in the distance range.
    NoStable,
    /// Smallest shared force among the stable equilibria.
    Stable { min_force: f64 },
    /// The chain could not be solved for this cell.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCell {
    pub t12: f64,
    pub r12: f64,
    pub status: CellStatus,
}

impl MapCell {
    pub fn min_force(&self) -> Option<f64> {
        match self.status {
            CellStatus::Stable { min_force } => Some(min_force),
            _ => None,
        }
    }

    pub fn feasible(&self) -> bool {
        self.status != CellStatus::Infeasible
    }
}

/// Minimal stable force over a (t12, r12) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub t12: Vec<f64>,
    pub r12: Vec<f64>,
    /// Row-major: row `i` holds `r12[i]` and runs over all `t12`.
    pub cells: Vec<MapCell>,
}

/// Zero crossing of the minimal stable force between two neighbouring
/// cells of a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub row: usize,
    /// Index of the left cell of the pair.
    pub col: usize,
    pub r12: f64,
    /// Linearly interpolated t12 of the crossing.
    pub t12: f64,
}

impl StabilityMap {
    pub fn cell(&self, row: usize, col: usize) -> &MapCell {
        &self.cells[row * self.t12.len() + col]
    }

    pub fn row(&self, row: usize) -> &[MapCell] {
        let n = self.t12.len();
        &self.cells[row * n..(row + 1) * n]
    }

    /// Sign changes of the minimal stable force between adjacent cells that
    /// both have stable equilibria.
    pub fn zero_contour(&self) -> Vec<ContourPoint> {
        let mut out = Vec::new();
        for (row, &r12) in self.r12.iter().enumerate() {
            let cells = self.row(row);
            for (col, w) in cells.windows(2).enumerate() {
                if let (Some(a), Some(b)) = (w[0].min_force(), w[1].min_force()) {
                    if (a < 0.0) != (b < 0.0) {
                        let frac = a / (a - b);
                        out.push(ContourPoint {
                            row,
                            col,
                            r12,
                            t12: w[0].t12 + frac * (w[1].t12 - w[0].t12),
                        });
                    }
                }
            }
        }
        out
    }
}

/// Settings shared by all cells of a stability scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSettings {
    pub modes: ModePair,
    pub injection: Injection,
    pub phi: f64,
    pub range: DistanceRange,
    pub samples: Option<usize>,
}

/// Runs [`find_equilibria`] on every cell of the grid. Cells are evaluated
/// in parallel; the output order is fixed (row-major in r12, then t12).
pub fn scan_stability_region(
    t12_axis: Axis,
    r12_axis: Axis,
    settings: &ScanSettings,
) -> StabilityMap {
    let t12 = t12_axis.values();
    let r12 = r12_axis.values();
    let pairs: Vec<(f64, f64)> = r12
        .iter()
        .flat_map(|&r| t12.iter().map(move |&t| (t, r)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(t12, r12)| MapCell {
            t12,
            r12,
            status: scan_cell(t12, r12, settings),
        })
        .collect();
    StabilityMap { t12, r12, cells }
}

fn scan_cell(t12: f64, r12: f64, s: &ScanSettings) -> CellStatus {
    if t12 * t12 + r12 * r12 > 1.0 {
        return CellStatus::Infeasible;
    }
    let run = || -> Result<CellStatus> {
        let p = SimpleFourPortParams::new(t12, r12, s.phi)?;
        let system = TwoBeadSystem::identical(&p, s.modes, s.injection)?;
        let min = find_equilibria(&system, s.range, s.samples)?
            .into_iter()
            .filter(|e| e.stable)
            .map(|e| e.f_common)
            .fold(None, |acc: Option<f64>, f| {
                Some(acc.map_or(f, |a| a.min(f)))
            });
        Ok(match min {
            Some(min_force) => CellStatus::Stable { min_force },
            None => CellStatus::NoStable,
        })
    };
    run().unwrap_or(CellStatus::Failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn modes() -> ModePair {
        ModePair::with_ratio(0.9).unwrap()
    }

    #[test]
    fn first_bead_force_is_flat_without_reflection() {
        let sys = forward_only_system(0.95, 0.0, modes(), Injection::higher_mode()).unwrap();
        let table = force_vs_distance(&sys, DistanceRange::new(0.1, 100.0).unwrap(), 500).unwrap();
        let f0 = table[0].f1;
        assert!(table.iter().all(|s| (s.f1 - f0).abs() < 1e-15));
    }

    #[test]
    fn second_bead_force_has_beat_period() {
        let m = modes();
        let sys = forward_only_system(0.95, 0.0, m, Injection::higher_mode()).unwrap();
        let period = m.beat_period();
        assert!((period - 62.832).abs() < 1e-3);
        for d in [0.3, 5.0, 21.7, 40.0] {
            let (_, a) = sys.forces(d).unwrap();
            let (_, b) = sys.forces(d + period).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_makes_first_bead_force_oscillate() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let sys = TwoBeadSystem::identical(&p, modes(), Injection::higher_mode()).unwrap();
        let table = force_vs_distance(&sys, DistanceRange::new(0.1, 20.0).unwrap(), 2000).unwrap();
        let (lo, hi) = table.iter().fold((f64::MAX, f64::MIN), |(lo, hi), s| {
            (lo.min(s.f1), hi.max(s.f1))
        });
        assert!(hi - lo > 1e-3);
    }

    #[test]
    fn forward_only_equilibria_match_analytic_roots() {
        // Forward-only pair fed through the higher mode:
        // F1 - F2 = 0  <=>  cos((k1 - k2) d) = (1 - t²)/t²
        let m = modes();
        let t: f64 = 0.95;
        let sys = forward_only_system(t, 0.0, m, Injection::higher_mode()).unwrap();
        let range = DistanceRange::default_for(&m);
        let eq = find_equilibria(&sys, range, None).unwrap();
        let c = (1.0 - t * t) / (t * t);
        let theta = c.acos();
        let dk = m.k1 - m.k2;
        let mut expected: Vec<(f64, bool)> = Vec::new();
        for n in 0..3 {
            let base = 2.0 * std::f64::consts::PI * n as f64;
            // stable where sin(θ) < 0
            expected.push(((base + theta) / dk, false));
            expected.push(((base + 2.0 * std::f64::consts::PI - theta) / dk, true));
        }
        expected.retain(|(d, _)| *d > range.start && *d <= range.end);
        expected.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(eq.len(), expected.len());
        for (e, (d, stable)) in eq.iter().zip(expected) {
            assert!((e.d_star - d).abs() < 1e-8, "{} vs {}", e.d_star, d);
            assert_eq!(e.stable, stable);
            assert!(e.f_common < 0.0);
            let (f1, f2) = sys.forces(e.d_star).unwrap();
            assert!((f1 - f2).abs() < 1e-9);
        }
    }

    #[test]
    fn transparent_beads_have_no_isolated_roots() {
        let sys = forward_only_system(1.0, 0.0, modes(), Injection::higher_mode()).unwrap();
        let eq = find_equilibria(&sys, DistanceRange::default_for(&modes()), None).unwrap();
        assert!(eq.is_empty());
    }

    #[test]
    fn reference_bead_has_stable_tractor_points() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let sys = TwoBeadSystem::identical(&p, modes(), Injection::higher_mode()).unwrap();
        let eq = find_equilibria(&sys, DistanceRange::default_for(&modes()), None).unwrap();
        assert!(eq.iter().any(|e| e.is_stable_tractor()));
        for e in &eq {
            let (f1, f2) = sys.forces(e.d_star).unwrap();
            assert!((f1 - f2).abs() < 1e-9);
        }
    }

    #[test]
    fn stability_labels_match_perturbation_test() {
        let p = SimpleFourPortParams::new(0.54, 0.12, 0.0).unwrap();
        let sys = TwoBeadSystem::identical(&p, modes(), Injection::higher_mode()).unwrap();
        let eq = find_equilibria(&sys, DistanceRange::new(0.5, 130.0).unwrap(), None).unwrap();
        let eps = 1e-3;
        for e in eq {
            let gp = sys.imbalance(e.d_star + eps).unwrap();
            let gm = sys.imbalance(e.d_star - eps).unwrap();
            let restoring = gp > 0.0 && gm < 0.0;
            assert_eq!(restoring, e.stable, "d* = {}", e.d_star);
        }
    }

    #[test]
    fn cutoff_is_bracketed() {
        let inj = Injection::higher_mode();
        let cut = tractor_cutoff(0.0, modes(), inj, None, (0.5, 0.99), 1e-4)
            .unwrap()
            .unwrap();
        assert!(cut > 0.69 && cut < 0.73, "{cut}");
        let rows = binding_distance_curve(&[0.6, 0.95], 0.0, modes(), inj, None).unwrap();
        assert!(rows[0].distances.is_empty());
        assert!(!rows[1].distances.is_empty());
    }

    #[test]
    fn axis_values() {
        let a = Axis {
            min: 0.0,
            max: 0.99,
            count: 100,
        };
        let v = a.values();
        assert_eq!(v.len(), 100);
        assert!((v[54] - 0.54).abs() < 1e-15);
        assert_eq!(v[99], 0.99);
    }

    #[test]
    fn scan_marks_infeasible_cells() {
        let settings = ScanSettings {
            modes: modes(),
            injection: Injection::higher_mode(),
            phi: 0.0,
            range: DistanceRange::new(0.05, 40.0).unwrap(),
            samples: Some(1500),
        };
        let axis = Axis {
            min: 0.2,
            max: 0.95,
            count: 4,
        };
        let map = scan_stability_region(axis, axis, &settings);
        assert_eq!(map.cells.len(), 16);
        let last = map.cell(3, 3);
        assert_eq!(last.status, CellStatus::Infeasible);
        assert!(map.cell(0, 0).feasible());
    }

    #[test]
    fn invalid_ranges() {
        assert!(DistanceRange::new(0.0, 1.0).is_err());
        assert!(DistanceRange::new(2.0, 1.0).is_err());
        let sys = forward_only_system(0.9, 0.0, modes(), Injection::higher_mode()).unwrap();
        assert!(force_vs_distance(&sys, DistanceRange::new(1.0, 2.0).unwrap(), 1).is_err());
        let _ = Complex64::new(0.0, 0.0);
    }
}
