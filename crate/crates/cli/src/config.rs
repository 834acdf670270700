//! Run configuration: JSON file plus `--set path=value` overrides.

use std::path::Path;

use fibertractor::equilibria::{Axis, DistanceRange};
use fibertractor::paraxial::{default_orders, BeadSpec, DiskQuadrature, WaveguideSpec};
use fibertractor::{Complex64, Injection, ModePair, SimpleFourPortParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub modes: ModesConfig,
    pub injection: InjectionConfig,
    pub force_single: ForceSingleConfig,
    pub force_chain: ForceChainConfig,
    pub equilibria: EquilibriaConfig,
    pub binding_curve: BindingCurveConfig,
    pub stability_map: StabilityMapConfig,
    pub estimate_coupling: EstimateCouplingConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesConfig {
    pub k1: f64,
    pub k2: f64,
    pub n_medium: f64,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 0.9,
            n_medium: 1.0,
        }
    }
}

/// Complex amplitudes as `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionConfig {
    pub a1: [f64; 2],
    pub a2: [f64; 2],
    pub d1: [f64; 2],
    pub d2: [f64; 2],
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            a1: [0.0, 0.0],
            a2: [1.0, 0.0],
            d1: [0.0, 0.0],
            d2: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeadModel {
    /// Forward-only bead, swept over its self transmission t.
    TwoPort,
    /// Symmetric bead with reflection, swept over r12 at fixed t12.
    FourPort,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceSingleConfig {
    pub model: BeadModel,
    /// k2/k1 values, one curve each; the `modes` section sets k1.
    pub k2_ratios: Vec<f64>,
    pub sweep: Axis,
    /// Fixed cross transmission for the four-port sweep.
    pub t12: f64,
    pub phi: f64,
}

impl Default for ForceSingleConfig {
    fn default() -> Self {
        Self {
            model: BeadModel::TwoPort,
            k2_ratios: vec![0.7, 0.8, 0.9],
            sweep: Axis {
                min: 0.0,
                max: 1.0,
                count: 101,
            },
            t12: 0.8,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeadConfig {
    pub t12: f64,
    pub r12: f64,
    pub phi: f64,
}

impl Default for BeadConfig {
    fn default() -> Self {
        Self {
            t12: 0.54,
            r12: 0.12,
            phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceChainConfig {
    pub bead: BeadConfig,
    /// Number of identical, equally spaced beads.
    pub count: usize,
    /// Bead spacing axis.
    pub spacing: Axis,
}

impl Default for ForceChainConfig {
    fn default() -> Self {
        Self {
            bead: BeadConfig::default(),
            count: 2,
            spacing: Axis {
                min: 0.05,
                max: 125.0,
                count: 5000,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaConfig {
    pub bead: BeadConfig,
    /// Defaults to (0.05/k1, two beat periods].
    pub range: Option<RangeConfig>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BindingCurveConfig {
    pub k2_ratios: Vec<f64>,
    pub t: Axis,
    pub phi: f64,
    /// Also locate the lower transmission cutoff by bisection.
    pub cutoff: bool,
    pub cutoff_tolerance: f64,
}

impl Default for BindingCurveConfig {
    fn default() -> Self {
        Self {
            k2_ratios: vec![0.7, 0.8, 0.9],
            t: Axis {
                min: 0.5,
                max: 0.99,
                count: 50,
            },
            phi: 0.0,
            cutoff: true,
            cutoff_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityMapConfig {
    pub t12: Axis,
    pub r12: Axis,
    pub phi: f64,
    pub range: Option<RangeConfig>,
    pub samples: Option<usize>,
}

impl Default for StabilityMapConfig {
    fn default() -> Self {
        let axis = Axis {
            min: 0.0,
            max: 0.99,
            count: 100,
        };
        Self {
            t12: axis,
            r12: axis,
            phi: 0.0,
            range: None,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingOutput {
    /// Coupling coefficients over a diameter sweep.
    Sweep,
    /// Phase, distorted and reflected profiles along a cut.
    Profile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateCouplingConfig {
    pub output: CouplingOutput,
    pub a: f64,
    pub n0: f64,
    pub index: f64,
    pub mode_orders: Vec<(u32, u32)>,
    /// Bead centre in guide coordinates; defaults to the guide axis.
    pub center: Option<(f64, f64)>,
    pub diameters: Axis,
    pub target: [(u32, u32); 2],
    pub quadrature: DiskQuadrature,
    pub renormalize: bool,
    /// Profile output: bead diameter, cut height (defaults to the bead
    /// centre), sample count and input mode order.
    pub profile_diameter: f64,
    pub profile_y: Option<f64>,
    pub profile_samples: usize,
    pub profile_mode: (u32, u32),
}

impl Default for EstimateCouplingConfig {
    fn default() -> Self {
        Self {
            output: CouplingOutput::Sweep,
            a: 9.0,
            n0: 1.0,
            index: 1.5,
            mode_orders: default_orders(),
            center: None,
            diameters: Axis {
                min: 0.0,
                max: 4.0,
                count: 41,
            },
            target: [(1, 1), (3, 1)],
            quadrature: DiskQuadrature::default(),
            renormalize: false,
            profile_diameter: 2.0,
            profile_y: None,
            profile_samples: 201,
            profile_mode: (1, 1),
        }
    }
}

/// Reads the config file (if any) over the defaults, applies overrides and
/// deserialises. Partial sections keep the defaults of omitted fields.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Validation(format!("cannot read config {}: {e}", p.display()))
            })?;
            serde_json::from_str::<Value>(&text).map_err(|e| {
                CliError::Validation(format!("config {} is not valid JSON: {e}", p.display()))
            })?
        }
        None => Value::Object(Default::default()),
    };
    if !file.is_object() {
        return Err(CliError::Validation(
            "config: top level must be an object".into(),
        ));
    }
    let mut value = serde_json::to_value(RunConfig::default()).expect("defaults serialise");
    merge(&mut value, file);
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Validation(format!("config: {e}")))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a string.
fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        CliError::Validation(format!(
            "override `{spec}` is not of the form key.path=value"
        ))
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Validation(format!(
            "override `{spec}` has an empty key"
        )));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Validation(format!(
                "override `{spec}`: `{key}` is not a section"
            )));
        }
        node = node
            .as_object_mut()
            .expect("checked above")
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Validation(format!(
            "override `{spec}` does not address a section"
        ))),
    }
}

fn invalid(field: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {err}"))
}

impl RunConfig {
    pub fn mode_pair(&self) -> Result<ModePair, CliError> {
        ModePair::new(self.modes.k1, self.modes.k2)
            .and_then(|m| m.with_medium(self.modes.n_medium))
            .map_err(|e| invalid("modes", e))
    }

    /// Mode pair with k2 = ratio·k1.
    pub fn mode_pair_with_ratio(&self, ratio: f64, field: &str) -> Result<ModePair, CliError> {
        ModePair::new(self.modes.k1, ratio * self.modes.k1)
            .and_then(|m| m.with_medium(self.modes.n_medium))
            .map_err(|e| invalid(field, e))
    }

    pub fn injection(&self) -> Result<Injection, CliError> {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let i = &self.injection;
        Injection::new(c(i.a1), c(i.a2), c(i.d1), c(i.d2)).map_err(|e| invalid("injection", e))
    }
}

impl BeadConfig {
    pub fn params(&self, field: &str) -> Result<SimpleFourPortParams, CliError> {
        SimpleFourPortParams::new(self.t12, self.r12, self.phi).map_err(|e| invalid(field, e))
    }
}

pub fn check_axis(axis: &Axis, field: &str, lo: f64, hi: f64) -> Result<(), CliError> {
    if axis.count == 0 {
        return Err(invalid(field, "count must be positive"));
    }
    if !(axis.min.is_finite() && axis.max.is_finite() && axis.min <= axis.max) {
        return Err(invalid(
            field,
            format!("need min <= max (got {} .. {})", axis.min, axis.max),
        ));
    }
    if axis.min < lo || axis.max > hi {
        return Err(invalid(field, format!("values must lie in [{lo}, {hi}]")));
    }
    Ok(())
}

pub fn distance_range(
    range: &Option<RangeConfig>,
    modes: &ModePair,
    field: &str,
) -> Result<DistanceRange, CliError> {
    match range {
        Some(r) => DistanceRange::new(r.start, r.end).map_err(|e| invalid(field, e)),
        None => Ok(DistanceRange::default_for(modes)),
    }
}

impl EstimateCouplingConfig {
    pub fn waveguide(&self) -> Result<WaveguideSpec, CliError> {
        let spec = WaveguideSpec::new(self.a, self.n0).with_orders(self.mode_orders.clone());
        spec.validate()
            .map_err(|e| invalid("estimate_coupling", e))?;
        Ok(spec)
    }

    pub fn bead(
        &self,
        diameter: f64,
        spec: &WaveguideSpec,
        field: &str,
    ) -> Result<BeadSpec, CliError> {
        let mut bead = BeadSpec::centered(0.5 * diameter, self.index, spec);
        if let Some(c) = self.center {
            bead.center = c;
        }
        bead.validate(spec).map_err(|e| invalid(field, e))?;
        Ok(bead)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_sections() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut v, "force_single.sweep.count=5").unwrap();
        apply_override(&mut v, "force_chain.bead.t12=0.3").unwrap();
        apply_override(&mut v, "estimate_coupling.output=profile").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.force_chain.bead.t12, 0.3);
        assert_eq!(cfg.force_chain.bead.r12, 0.12);
        assert_eq!(cfg.estimate_coupling.output, CouplingOutput::Profile);
        assert_eq!(cfg.force_single.sweep.count, 5);
        assert_eq!(cfg.force_single.sweep.max, 1.0);
    }

    #[test]
    fn file_sections_merge_over_defaults() {
        let mut base = serde_json::to_value(RunConfig::default()).unwrap();
        merge(
            &mut base,
            serde_json::json!({"stability_map": {"t12": {"count": 7}}}),
        );
        let cfg: RunConfig = serde_json::from_value(base).unwrap();
        assert_eq!(cfg.stability_map.t12.count, 7);
        assert_eq!(cfg.stability_map.t12.max, 0.99);
        assert_eq!(cfg.stability_map.r12.count, 100);
    }

    #[test]
    fn malformed_overrides() {
        let mut v = Value::Object(Default::default());
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
        apply_override(&mut v, "modes.k1=2").unwrap();
        assert!(apply_override(&mut v, "modes.k1.x=2").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let v: Value = serde_json::json!({"modes": {"k3": 1.0}});
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut cfg = RunConfig::default();
        cfg.modes.k2 = 1.5;
        let err = cfg.mode_pair().unwrap_err();
        assert!(err.to_string().starts_with("modes:"));
        cfg.force_chain.bead.r12 = 0.95;
        let err = cfg.force_chain.bead.params("force_chain.bead").unwrap_err();
        assert!(err.to_string().contains("force_chain.bead"));
    }
}
