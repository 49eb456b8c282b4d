//! Run configuration: JSON schema, unit conventions and resolution to SI.
//!
//! Frequencies are numbers or strings of the form `"2pi*X"`, scaled by the
//! unit of their group: `units.trap` for trap frequencies, `units.drive` for
//! drive amplitudes, detunings and Stark shifts. Sweep rates are in drive
//! units per millisecond and all times are in milliseconds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use tweezer_core::analytics::{Thresholds, ValidityInputs};
use tweezer_core::experiments::{Axis, Bound, OptimizeOptions, Protocol, Scale};
use tweezer_core::levels::LevelModel;
use tweezer_core::presets::{preset, Preset};
use tweezer_core::propagator::{StepControl, DEFAULT_MAX_SAMPLES};
use tweezer_core::units::{
    derive_all, ChemicalPotential, PhysicalSystem, ATOMIC_MASS_UNIT, BOHR_RADIUS, HBAR,
};

use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    /// Value times 1e3 rad/s.
    AngularKhz,
    /// Value times 2 pi 1e3 rad/s.
    TwoPiKhz,
    /// Value times 2 pi rad/s.
    TwoPiHz,
    RadPerS,
}

impl FrequencyUnit {
    fn scale(self) -> f64 {
        match self {
            FrequencyUnit::AngularKhz => 1e3,
            FrequencyUnit::TwoPiKhz => 2.0 * PI * 1e3,
            FrequencyUnit::TwoPiHz => 2.0 * PI,
            FrequencyUnit::RadPerS => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default = "two_pi_khz")]
    pub trap: FrequencyUnit,
    #[serde(default = "angular_khz")]
    pub drive: FrequencyUnit,
}

fn two_pi_khz() -> FrequencyUnit {
    FrequencyUnit::TwoPiKhz
}
fn angular_khz() -> FrequencyUnit {
    FrequencyUnit::AngularKhz
}

impl Default for Units {
    fn default() -> Self {
        Units {
            trap: two_pi_khz(),
            drive: angular_khz(),
        }
    }
}

/// A number, or a string `"2pi*X"` standing for `2 pi X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    pub fn value(&self) -> Result<f64, Failure> {
        match self {
            Quantity::Number(v) => Ok(*v),
            Quantity::Text(s) => parse_quantity(s),
        }
    }
}

fn parse_quantity(text: &str) -> Result<f64, Failure> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Failure::config(format!("cannot read `{text}` as a number or `2pi*X`"));
    for prefix in ["2pi*", "2*pi*"] {
        if let Some(rest) = compact.strip_prefix(prefix) {
            return rest.parse::<f64>().map(|x| 2.0 * PI * x).map_err(|_| bad());
        }
    }
    compact.parse::<f64>().map_err(|_| bad())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrapFrequency {
    Isotropic(Quantity),
    PerAxis([Quantity; 3]),
}

impl TrapFrequency {
    fn resolve(&self, unit: FrequencyUnit) -> Result<[f64; 3], Failure> {
        match self {
            TrapFrequency::Isotropic(q) => Ok([q.value()? * unit.scale(); 3]),
            TrapFrequency::PerAxis(qs) => {
                let mut out = [0.0; 3];
                for (o, q) in out.iter_mut().zip(qs) {
                    *o = q.value()? * unit.scale();
                }
                Ok(out)
            }
        }
    }
}

/// Overrides of the physical system. Without a preset, `nu_a`, `nu_b`,
/// `atom_number` and `peak_density` are required.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Atomic mass in atomic mass units; rubidium-87 if absent.
    pub atom_mass_amu: Option<f64>,
    pub nu_a: Option<TrapFrequency>,
    pub nu_b: Option<TrapFrequency>,
    pub atom_number: Option<f64>,
    /// Peak condensate density (m^-3).
    pub peak_density: Option<f64>,
    /// Scattering lengths in Bohr radii.
    pub a_aa_bohr: Option<f64>,
    pub a_bb_bohr: Option<f64>,
    pub a_ab_bohr: Option<f64>,
    /// Chemical potential over hbar, in drive units; mean field if absent.
    pub chemical_potential: Option<Quantity>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    pub min: Quantity,
    pub max: Quantity,
    pub points: usize,
    #[serde(default = "linear")]
    pub scale: Scale,
}

fn linear() -> Scale {
    Scale::Linear
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Swept parameters; the preset axes if absent.
    pub axes: Option<Vec<AxisConfig>>,
    /// Probability levels of the exported contours.
    pub contour_levels: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub name: String,
    pub min: Quantity,
    pub max: Quantity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub bounds: Vec<BoundConfig>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Starting point in config units, one value per bound.
    pub start: Option<Vec<Quantity>>,
}

fn default_budget() -> usize {
    100
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    /// Fixed step (ms); automatic if absent.
    pub step: Option<f64>,
    pub max_samples: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub target_probability: Option<f64>,
    pub strong: Option<f64>,
    pub weak: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    #[serde(default)]
    pub units: Units,
    pub system: Option<SystemConfig>,
    pub n_max: Option<usize>,
    /// `{"protocol": kind, parameter: value, ...}`; missing parameters come
    /// from the preset, or from the default preset of that kind.
    pub protocol: Option<Map<String, Value>>,
    pub sweep: Option<SweepConfig>,
    pub optimize: Option<OptimizeConfig>,
    pub propagate: Option<PropagateConfig>,
    pub check: Option<CheckConfig>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::config(format!("config: {e}")))
    }
}

/// Physical meaning of a protocol parameter, for unit conversion.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Frequency,
    Rate,
    Time,
    Plain,
}

fn kind_of(name: &str) -> Kind {
    match name {
        "omega_l" | "omega_hat" | "delta_hat" | "detuning_start" | "detuning_end" => Kind::Frequency,
        "rate" => Kind::Rate,
        "switch_time" | "t_omega" | "delay" | "delta_tau" => Kind::Time,
        _ => Kind::Plain,
    }
}

impl Units {
    /// Converts a protocol parameter from config units to SI.
    fn si_value(&self, name: &str, value: f64) -> f64 {
        match kind_of(name) {
            Kind::Frequency => value * self.drive.scale(),
            Kind::Rate => value * self.drive.scale() * 1e3,
            Kind::Time => value * 1e-3,
            Kind::Plain => value,
        }
    }

    /// Converts a protocol parameter from SI to config units.
    pub fn config_value(&self, name: &str, value: f64) -> f64 {
        value / self.si_value(name, 1.0)
    }
}

/// Default preset supplying parameters for each protocol kind.
fn default_preset_for(kind: &str) -> Option<&'static str> {
    Some(match kind {
        "ramp" => "fig3a",
        "scrap_1atom" | "delay_scan" => "fig4",
        "scrap_2atom" => "fig6",
        "pi_pulse" => "fig7",
        "sequential_pi" => "fig7_sequential",
        _ => return None,
    })
}

/// Everything a command needs, in SI.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub preset: Option<String>,
    pub units: Units,
    pub system: PhysicalSystem,
    pub n_max: usize,
    pub protocol: Protocol,
    pub axes: Option<Vec<Axis>>,
    pub contour_levels: Vec<f64>,
    pub bounds: Option<Vec<Bound>>,
    pub optimize: Option<OptimizeOptions>,
    pub step_control: StepControl,
    pub target_probability: Option<f64>,
    pub thresholds: Thresholds,
}

impl Resolved {
    pub fn model(&self) -> Result<LevelModel, Failure> {
        Ok(LevelModel::with_n_max(derive_all(&self.system)?, self.n_max)?)
    }

    pub fn validity_inputs(&self) -> ValidityInputs {
        ValidityInputs {
            target_probability: self.target_probability,
            thresholds: Some(self.thresholds),
            ..self.protocol.validity_inputs()
        }
    }
}

fn missing(key: &str) -> Failure {
    Failure::config(format!("missing required key `{key}` (no preset given)"))
}

fn resolve_system(base: Option<&Preset>, cfg: Option<&SystemConfig>, units: Units) -> Result<PhysicalSystem, Failure> {
    let empty = SystemConfig::default();
    let cfg = cfg.unwrap_or(&empty);
    let mut system = match base {
        Some(p) => p.system.clone(),
        None => {
            let nu_a = cfg.nu_a.as_ref().ok_or_else(|| missing("system.nu_a"))?.resolve(units.trap)?;
            let nu_b = cfg.nu_b.as_ref().ok_or_else(|| missing("system.nu_b"))?.resolve(units.trap)?;
            let atoms = cfg.atom_number.ok_or_else(|| missing("system.atom_number"))?;
            let density = cfg.peak_density.ok_or_else(|| missing("system.peak_density"))?;
            PhysicalSystem {
                nu_a,
                nu_b,
                ..PhysicalSystem::rb87(1.0, 1.0, atoms, density)
            }
        }
    };
    if let Some(v) = &cfg.nu_a {
        system.nu_a = v.resolve(units.trap)?;
    }
    if let Some(v) = &cfg.nu_b {
        system.nu_b = v.resolve(units.trap)?;
    }
    if let Some(v) = cfg.atom_number {
        system.atom_number = v;
    }
    if let Some(v) = cfg.peak_density {
        system.peak_density = v;
    }
    system.atom_mass = cfg.atom_mass_amu.map_or(system.atom_mass, |m| m * ATOMIC_MASS_UNIT);
    for (slot, value) in [
        (&mut system.a_aa, cfg.a_aa_bohr),
        (&mut system.a_bb, cfg.a_bb_bohr),
        (&mut system.a_ab, cfg.a_ab_bohr),
    ] {
        if let Some(v) = value {
            *slot = v * BOHR_RADIUS;
        }
    }
    if let Some(mu) = &cfg.chemical_potential {
        system.chemical_potential =
            ChemicalPotential::Given(mu.value()? * units.drive.scale() * HBAR);
    }
    system.validate()?;
    Ok(system)
}

fn resolve_protocol(base: Option<&Preset>, cfg: Option<&Map<String, Value>>, units: Units) -> Result<Protocol, Failure> {
    let requested = match cfg.and_then(|m| m.get("protocol")) {
        Some(Value::String(kind)) => Some(kind.as_str()),
        Some(other) => return Err(Failure::config(format!("`protocol.protocol` must be a string, got {other}"))),
        None => None,
    };
    let start = match (base, requested) {
        (Some(p), None) => p.protocol.clone(),
        (Some(p), Some(kind)) if p.protocol.name() == kind || (kind == "delay_scan" && p.protocol.name() == "scrap_1atom") => {
            p.protocol.clone()
        }
        (_, Some(kind)) => {
            let name = default_preset_for(kind).ok_or_else(|| Failure::config(format!("unknown protocol `{kind}`")))?;
            preset(name)?.protocol
        }
        (None, None) => return Err(missing("protocol.protocol")),
    };
    let Some(cfg) = cfg else {
        return Ok(start);
    };
    let mut merged = serde_json::to_value(&start).map_err(|e| Failure::config(e.to_string()))?;
    let object = merged.as_object_mut().expect("protocols serialize to objects");
    for (key, value) in cfg {
        if key == "protocol" {
            continue;
        }
        let converted = match (kind_of(key), value) {
            (Kind::Plain, v) | (_, v @ Value::Null) => v.clone(),
            (_, v) => {
                let q: Quantity = serde_json::from_value(v.clone())
                    .map_err(|_| Failure::config(format!("`protocol.{key}` must be a number, got {v}")))?;
                Value::from(units.si_value(key, q.value()?))
            }
        };
        object.insert(key.clone(), converted);
    }
    serde_json::from_value(merged).map_err(|e| Failure::config(format!("protocol: {e}")))
}

fn resolve_axis(axis: &AxisConfig, units: Units) -> Result<Axis, Failure> {
    let resolved = Axis {
        name: axis.name.clone(),
        min: units.si_value(&axis.name, axis.min.value()?),
        max: units.si_value(&axis.name, axis.max.value()?),
        points: axis.points,
        scale: axis.scale,
    };
    resolved.validate()?;
    Ok(resolved)
}

pub fn resolve(cfg: &RunConfig, preset_flag: Option<&str>, seed_flag: Option<u64>) -> Result<Resolved, Failure> {
    let preset_name = preset_flag.map(str::to_string).or_else(|| cfg.preset.clone());
    let base = preset_name.as_deref().map(preset).transpose()?;
    let units = cfg.units;
    let system = resolve_system(base.as_ref(), cfg.system.as_ref(), units)?;
    let n_max = cfg.n_max.or(base.as_ref().map(|p| p.n_max)).unwrap_or(2);
    let protocol = resolve_protocol(base.as_ref(), cfg.protocol.as_ref(), units)?;

    let sweep = cfg.sweep.clone().unwrap_or_default();
    let axes = match &sweep.axes {
        Some(list) => Some(list.iter().map(|a| resolve_axis(a, units)).collect::<Result<Vec<_>, _>>()?),
        None => base
            .as_ref()
            .filter(|p| p.protocol.name() == protocol.name() && !p.axes.is_empty())
            .map(|p| p.axes.clone()),
    };
    let contour_levels = sweep.contour_levels.unwrap_or_else(|| vec![0.99, 0.80]);

    let (bounds, optimize) = match &cfg.optimize {
        Some(o) => {
            let bounds = o
                .bounds
                .iter()
                .map(|b| {
                    Ok(Bound {
                        name: b.name.clone(),
                        min: units.si_value(&b.name, b.min.value()?),
                        max: units.si_value(&b.name, b.max.value()?),
                    })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let start = match &o.start {
                Some(values) => Some(
                    values
                        .iter()
                        .zip(&o.bounds)
                        .map(|(q, b)| Ok(units.si_value(&b.name, q.value()?)))
                        .collect::<Result<Vec<_>, Failure>>()?,
                ),
                None => None,
            };
            let options = OptimizeOptions {
                seed: seed_flag.or(cfg.seed).unwrap_or(0),
                start,
                ..OptimizeOptions::new(o.budget)
            };
            (Some(bounds), Some(options))
        }
        None => (None, None),
    };

    let prop = cfg.propagate.clone().unwrap_or_default();
    let step_control = StepControl {
        step: prop.step.map(|ms| ms * 1e-3),
        max_samples: prop.max_samples.unwrap_or(DEFAULT_MAX_SAMPLES),
    };
    let check = cfg.check.clone().unwrap_or_default();
    let defaults = Thresholds::default();
    let thresholds = Thresholds {
        strong: check.strong.unwrap_or(defaults.strong),
        weak: check.weak.unwrap_or(defaults.weak),
    };
    if !(thresholds.strong >= thresholds.weak && thresholds.weak > 0.0) {
        return Err(Failure::config("check thresholds need strong >= weak > 0"));
    }
    Ok(Resolved {
        preset: preset_name,
        units,
        system,
        n_max,
        protocol,
        axes,
        contour_levels,
        bounds,
        optimize,
        step_control,
        target_probability: check.target_probability,
        thresholds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities_parse_both_forms() {
        assert_eq!(parse_quantity("2.5").unwrap(), 2.5);
        assert!((parse_quantity("2pi*30").unwrap() - 60.0 * PI).abs() < 1e-12);
        assert!((parse_quantity(" 2*pi*1.5 ").unwrap() - 3.0 * PI).abs() < 1e-12);
        assert!(parse_quantity("pi*2").is_err());
    }

    #[test]
    fn preset_protocol_is_overridden_in_config_units() {
        let cfg = RunConfig::from_json(r#"{"preset": "fig4", "protocol": {"omega_hat": 12, "t_omega": 1.2}}"#).unwrap();
        let r = resolve(&cfg, None, None).unwrap();
        let Protocol::Scrap1Atom(p) = r.protocol else { panic!() };
        assert_eq!(p.omega_hat, 12e3);
        assert!((p.t_omega - 1.2e-3).abs() < 1e-15);
        assert_eq!(p.delta_hat, 22e3);
    }

    #[test]
    fn trap_unit_flag_changes_scale() {
        let text = r#"{"units": {"trap": "angular_khz"}, "system": {"nu_a": "2pi*30", "nu_b": "2pi*0.1",
            "atom_number": 1000, "peak_density": 3e19}, "protocol": {"protocol": "pi_pulse"}}"#;
        let r = resolve(&RunConfig::from_json(text).unwrap(), None, None).unwrap();
        assert!((r.system.nu_a[0] - 2.0 * PI * 30e3).abs() < 1e-6);
        let reference = tweezer_core::presets::reference_system();
        for (got, want) in r.system.nu_a.iter().chain(&r.system.nu_b).zip(reference.nu_a.iter().chain(&reference.nu_b)) {
            assert!((got / want - 1.0).abs() < 1e-14);
        }
        assert_eq!(r.system.a_ab, reference.a_ab);
    }

    #[test]
    fn unknown_and_missing_keys_are_config_errors() {
        assert_eq!(RunConfig::from_json(r#"{"presett": "fig4"}"#).unwrap_err().code, 2);
        let cfg = RunConfig::from_json(r#"{"system": {"nu_a": 30}}"#).unwrap();
        let err = resolve(&cfg, None, None).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("system.nu_b"));
        let bad_param = RunConfig::from_json(r#"{"preset": "fig7", "protocol": {"rate": 3}}"#).unwrap();
        assert_eq!(resolve(&bad_param, None, None).unwrap_err().code, 2);
    }

    #[test]
    fn switching_kind_uses_that_kinds_defaults() {
        let cfg = RunConfig::from_json(r#"{"preset": "fig3a", "protocol": {"protocol": "pi_pulse"}}"#).unwrap();
        let r = resolve(&cfg, None, None).unwrap();
        assert_eq!(r.protocol.name(), "pi_pulse");
        assert!(r.axes.is_none());
    }
}
