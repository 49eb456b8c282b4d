//! Closed-form companions to the simulation: dressed states, Landau-Zener
//! estimates and the validity margins of each transfer protocol.

use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use crate::error::{ensure_positive, Error, Result};
use crate::levels::LevelModel;
use crate::pulses::ScrapPulses;

/// Margin at or above which a `>>` condition counts as strongly satisfied.
pub const STRONG_MARGIN: f64 = 10.0;
/// Margin at or above which a `>>` condition counts as weakly satisfied.
pub const WEAK_MARGIN: f64 = 3.0;
/// Default target transfer probability.
pub const DEFAULT_TARGET_PROBABILITY: f64 = 0.99;

/// Eigenvalues and mixing angle of the `{|0>, |1>}` block.
///
/// The upper dressed state is `sin(theta) |0> + cos(theta) |1>`. The angle is
/// `atan2(|coupling|, level_offset) / 2` in `[0, pi/2]`, with `level_offset`
/// the energy of `|1>` over `hbar`; it is continuous through the crossing and
/// equals `pi / 4` on resonance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DressedPair {
    /// Upper eigenvalue (J).
    pub epsilon_plus: f64,
    /// Lower eigenvalue (J).
    pub epsilon_minus: f64,
    pub theta: f64,
    /// Splitting at this detuning (J).
    pub splitting: f64,
    /// Smallest splitting over all detunings, `hbar |coupling|` (J).
    pub delta: f64,
}

pub fn dressed(model: &LevelModel, detuning: f64, omega_l: f64) -> DressedPair {
    let hbar = model.hbar();
    let coupling = model.rabi_unit(0).unwrap_or(0.0) * omega_l;
    let offset = model.bare_energy(1).unwrap_or(0.0) / hbar - detuning;
    let root = offset.hypot(coupling);
    DressedPair {
        epsilon_plus: 0.5 * hbar * (offset + root),
        epsilon_minus: 0.5 * hbar * (offset - root),
        theta: 0.5 * coupling.abs().atan2(offset),
        splitting: hbar * root,
        delta: hbar * coupling.abs(),
    }
}

/// Landau-Zener estimate for one avoided crossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LandauZener {
    /// Adiabaticity parameter; infinite for a vanishing rate.
    #[serde(serialize_with = "finite_or_label")]
    pub alpha: f64,
    pub probability: f64,
    /// Set when the rate was zero and the adiabatic limit was returned.
    pub zero_rate: bool,
}

/// `P = 1 - exp(-pi delta^2 / (2 hbar^2 |rate|))` with `delta` in J.
pub fn lz_probability(splitting: f64, rate: f64, hbar: f64) -> LandauZener {
    if rate == 0.0 {
        let probability = if splitting == 0.0 { 0.0 } else { 1.0 };
        return LandauZener {
            alpha: if splitting == 0.0 { 0.0 } else { f64::INFINITY },
            probability,
            zero_rate: true,
        };
    }
    let gap = splitting / hbar;
    let alpha = PI * gap * gap / (2.0 * rate.abs());
    LandauZener {
        alpha,
        probability: -(-alpha).exp_m1(),
        zero_rate: false,
    }
}

/// Product of the `0 -> 1` and `1 -> 2` crossing probabilities.
pub fn sequential_lz(model: &LevelModel, omega_l: f64, rate: f64) -> Result<f64> {
    let hbar = model.hbar();
    let first = hbar * model.rabi_coupling(0, omega_l)?.abs();
    let second = hbar * model.rabi_coupling(1, omega_l)?.abs();
    Ok(lz_probability(first, rate, hbar).probability * lz_probability(second, rate, hbar).probability)
}

fn check_probability(p0: f64) -> Result<f64> {
    if p0 > 0.0 && p0 < 1.0 {
        Ok(p0)
    } else {
        Err(Error::ProbabilityOutOfRange(p0))
    }
}

/// Largest sweep rate reaching `p0` across a crossing of the given gap (rad/s^2).
///
/// `energy` is either the minimum splitting or the collisional shift, which
/// the stricter requirement substitutes for it.
pub fn ramp_rate_bound(energy: f64, p0: f64, hbar: f64) -> Result<f64> {
    let p0 = check_probability(p0)?;
    let gap = energy / hbar;
    Ok(PI * gap * gap / (2.0 * (1.0 - p0).ln().abs()))
}

/// Shortest one-atom transfer time consistent with `p0` (s).
pub fn min_transfer_time(energy: f64, p0: f64, hbar: f64) -> Result<f64> {
    let p0 = check_probability(p0)?;
    ensure_positive("energy gap", energy)?;
    Ok(2.0 / PI * (1.0 - p0).ln().abs() / (energy / hbar))
}

/// Ratio of the allowed to the actual detuning slope at the adiabatic crossing
/// of a Gaussian Stark pulse. Large values mean the crossing is adiabatic.
pub fn scrap_adiabatic_condition(
    stark_peak: f64,
    stark_width: f64,
    half_separation: f64,
    energy: f64,
    hbar: f64,
) -> Result<f64> {
    ensure_positive("Stark pulse width", stark_width)?;
    let gap = energy / hbar;
    let allowed = PI * gap * gap / 4.0;
    let x = half_separation / stark_width;
    let slope = (stark_peak * half_separation / (stark_width * stark_width) * (-x * x).exp()).abs();
    Ok(allowed / slope)
}

/// Lower bound on the pump width of a Gaussian SCRAP pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PumpWidthBound {
    /// Minimum pump width (s).
    pub min_width: f64,
    /// Time the dressed state needs to follow the crossing, `2 W / |dDelta/dt|` (s).
    pub jump_time: f64,
}

pub fn scrap_pump_width_bound(
    effective_peak: f64,
    stark_peak: f64,
    stark_width: f64,
    half_separation: f64,
) -> Result<PumpWidthBound> {
    ensure_positive("Stark pulse width", stark_width)?;
    ensure_positive("crossing half-separation", half_separation)?;
    if stark_peak == 0.0 {
        return Err(Error::Singular("Stark pulse peak is zero"));
    }
    let x = half_separation / stark_width;
    let min_width = (effective_peak * stark_width * stark_width / (half_separation * stark_peak)
        * (x * x).exp())
    .abs();
    let slope = 2.0 * stark_peak * half_separation / (stark_width * stark_width) * (-x * x).exp();
    Ok(PumpWidthBound {
        min_width,
        jump_time: (2.0 * effective_peak / slope).abs(),
    })
}

/// Classification of a margin against the strong and weak thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Strong,
    Weak,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub strong: f64,
    pub weak: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            strong: STRONG_MARGIN,
            weak: WEAK_MARGIN,
        }
    }
}

impl Thresholds {
    pub fn classify(&self, margin: f64) -> Verdict {
        if margin >= self.strong {
            Verdict::Strong
        } else if margin >= self.weak {
            Verdict::Weak
        } else {
            Verdict::Fail
        }
    }
}

/// A margin and its verdict; infinite margins serialize as `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check {
    #[serde(serialize_with = "finite_or_label")]
    pub margin: f64,
    pub verdict: Verdict,
}

fn finite_or_label<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_finite() {
        s.serialize_f64(*value)
    } else if value.is_nan() {
        s.serialize_str("nan")
    } else if *value > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// What a validity check should look at besides the peak drive.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ValidityInputs {
    /// Sweep rate of an adiabatic ramp (rad/s^2).
    pub ramp_rate: Option<f64>,
    /// Gaussian SCRAP pulses.
    pub scrap: Option<ScrapPulses>,
    /// Target transfer probability; defaults to 0.99.
    pub target_probability: Option<f64>,
    pub thresholds: Option<Thresholds>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdiabaticityReport {
    pub omega_l: f64,
    pub target_probability: f64,
    pub thresholds: Thresholds,
    /// Landau-Zener parameter of the `0 -> 1` crossing at the given ramp rate.
    pub alpha_ad: Option<f64>,
    /// Rate bound with the minimum splitting as the gap (rad/s^2).
    pub ramp_rate_limit_splitting: f64,
    /// Rate bound with the collisional shift as the gap (rad/s^2).
    pub ramp_rate_limit: f64,
    /// Shortest one-atom transfer time (s).
    pub tau_min: f64,
    /// Collisional shift over the collective coupling.
    pub two_level: Check,
    /// Smallest tweezer frequency over the collective coupling.
    pub single_particle: Check,
    pub scrap_adiabatic: Option<Check>,
    pub scrap_pump_width: Option<Check>,
    pub scrap_diabatic: Option<Check>,
    pub scrap_pump_bound: Option<PumpWidthBound>,
}

impl AdiabaticityReport {
    pub fn checks(&self) -> Vec<(&'static str, Check)> {
        let mut out = vec![
            ("two_level", self.two_level),
            ("single_particle", self.single_particle),
        ];
        for (name, check) in [
            ("scrap_adiabatic", self.scrap_adiabatic),
            ("scrap_pump_width", self.scrap_pump_width),
            ("scrap_diabatic", self.scrap_diabatic),
        ] {
            if let Some(c) = check {
                out.push((name, c));
            }
        }
        out
    }

    pub fn all_strong(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.verdict == Verdict::Strong)
    }
}

/// Evaluates every applicable validity margin for a peak drive `omega_l`.
pub fn validity_check(
    model: &LevelModel,
    omega_l: f64,
    inputs: &ValidityInputs,
) -> Result<AdiabaticityReport> {
    let hbar = model.hbar();
    let d = model.derived();
    let p0 = inputs.target_probability.unwrap_or(DEFAULT_TARGET_PROBABILITY);
    let thresholds = inputs.thresholds.unwrap_or_default();
    let coupling = model.rabi_coupling(0, omega_l)?.abs();
    let splitting = hbar * coupling;
    let check = |margin: f64| Check {
        margin,
        verdict: thresholds.classify(margin),
    };
    let two_level = check(d.delta_e_coll / splitting);
    let single_particle = check(d.min_nu_a / coupling);
    let alpha_ad = inputs
        .ramp_rate
        .map(|rate| lz_probability(splitting, rate, hbar).alpha);

    let (mut scrap_adiabatic, mut scrap_pump_width, mut scrap_diabatic, mut scrap_pump_bound) =
        (None, None, None, None);
    if let Some(p) = inputs.scrap {
        let effective = model.rabi_unit(0)? * p.pump_peak;
        scrap_adiabatic = Some(check(scrap_adiabatic_condition(
            p.stark_peak,
            p.stark_width,
            p.half_separation,
            d.delta_e_coll,
            hbar,
        )?));
        let bound =
            scrap_pump_width_bound(effective, p.stark_peak, p.stark_width, p.half_separation)?;
        scrap_pump_width = Some(check(p.pump_width / bound.min_width));
        // Coupling left at the second crossing against its sweep rate.
        let pump_center = -p.delay;
        let second = 2.0 * p.half_separation;
        let residual = effective * (-((second - pump_center) / p.pump_width).powi(2)).exp();
        let x = p.half_separation / p.stark_width;
        let slope =
            2.0 * p.stark_peak * p.half_separation / (p.stark_width * p.stark_width) * (-x * x).exp();
        let alpha = PI * residual * residual / (2.0 * slope.abs());
        scrap_diabatic = Some(check(1.0 / alpha));
        scrap_pump_bound = Some(bound);
    }

    Ok(AdiabaticityReport {
        omega_l,
        target_probability: p0,
        thresholds,
        alpha_ad,
        ramp_rate_limit_splitting: ramp_rate_bound(splitting, p0, hbar)?,
        ramp_rate_limit: ramp_rate_bound(d.delta_e_coll, p0, hbar)?,
        tau_min: min_transfer_time(d.delta_e_coll, p0, hbar)?,
        two_level,
        single_particle,
        scrap_adiabatic,
        scrap_pump_width,
        scrap_diabatic,
        scrap_pump_bound,
    })
}
