use serde::{Deserialize, Serialize};

use crate::analytics::{lz_probability, sequential_lz, validity_check, ValidityInputs};
use crate::error::{Error, Result};
use crate::levels::LevelModel;
use crate::pulses::{
    build_ramp_schedule, build_resonant_gaussian, build_scrap_schedule,
    build_sequential_pi, build_sequential_scrap_schedule, build_switched_ramp_schedule,
    gaussian_peak_for_area, PulseSchedule, ScrapPulses, SequentialScrapPulses, Transition,
};

/// Linear detuning sweep through one or both crossings at constant drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampProtocol {
    /// Drive amplitude (rad/s).
    pub omega_l: f64,
    /// Magnitude of the detuning sweep rate (rad/s^2).
    pub rate: f64,
    /// Final number of tweezer atoms, 1 or 2.
    pub target: usize,
    /// Drive switching time (s); `None` keeps the drive on over `[0, T]` only.
    #[serde(default)]
    pub switch_time: Option<f64>,
    /// Initial detuning (rad/s); defaults to half a collisional shift below the
    /// one-atom resonance.
    #[serde(default)]
    pub detuning_start: Option<f64>,
    /// Final detuning (rad/s); defaults to a third of a collisional shift above
    /// the resonance of the last transfer step.
    #[serde(default)]
    pub detuning_end: Option<f64>,
}

impl RampProtocol {
    pub fn endpoints(&self, model: &LevelModel) -> Result<(f64, f64)> {
        let r = model.resonance_detunings();
        let shift = model.derived().delta_e_coll / model.hbar();
        let last = match self.target {
            1 => r.zero_one,
            2 => r.one_two,
            t => return Err(Error::LevelOutOfRange { index: t, max: 2 }),
        };
        Ok((
            self.detuning_start.unwrap_or(r.zero_one - shift / 2.0),
            self.detuning_end.unwrap_or(last + shift / 3.0),
        ))
    }

    /// Sweep duration, excluding switching (s).
    pub fn duration(&self, model: &LevelModel) -> Result<f64> {
        let (a, b) = self.endpoints(model)?;
        Ok(((b - a) / self.rate).abs())
    }

    pub fn schedule(&self, model: &LevelModel) -> Result<PulseSchedule> {
        let (from, to) = self.endpoints(model)?;
        let rate = self.rate.abs() * (to - from).signum();
        match self.switch_time {
            Some(t_r) => build_switched_ramp_schedule(from, to, rate, self.omega_l, t_r),
            None => build_ramp_schedule(from, to, rate, self.omega_l),
        }
    }
}

/// Gaussian pump with a Gaussian Stark pulse for one-atom transfer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrapProtocol {
    /// Peak drive (rad/s).
    pub omega_hat: f64,
    /// Pump width (s).
    pub t_omega: f64,
    /// Peak Stark shift (rad/s).
    pub delta_hat: f64,
    /// Stark width over pump width.
    pub width_ratio: f64,
    /// Crossing half-separation over Stark width.
    pub separation_ratio: f64,
    /// Pump delay (s); negative values move the pump towards the later crossing.
    #[serde(default)]
    pub delay: f64,
}

impl ScrapProtocol {
    pub fn pulses(&self) -> ScrapPulses {
        let stark_width = self.width_ratio * self.t_omega;
        ScrapPulses {
            pump_peak: self.omega_hat,
            pump_width: self.t_omega,
            stark_peak: self.delta_hat,
            stark_width,
            half_separation: self.separation_ratio * stark_width,
            delay: self.delay,
        }
    }
}

/// Stark pulse with a tanh-edged pump for two-atom transfer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialScrapProtocol {
    pub omega_hat: f64,
    pub t_omega: f64,
    pub delta_hat: f64,
    pub width_ratio: f64,
    pub separation_ratio: f64,
    /// Pump switching time over pump duration.
    pub ramp_fraction: f64,
}

impl SequentialScrapProtocol {
    pub fn pulses(&self) -> SequentialScrapPulses {
        let stark_width = self.width_ratio * self.t_omega;
        SequentialScrapPulses {
            pump_peak: self.omega_hat,
            pump_width: self.t_omega,
            ramp_time: self.ramp_fraction * self.t_omega,
            stark_peak: self.delta_hat,
            stark_width,
            half_separation: self.separation_ratio * stark_width,
        }
    }
}

/// Resonant Gaussian pulse on one transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiProtocol {
    /// Peak drive (rad/s); `None` selects the area-pi value.
    #[serde(default)]
    pub omega_hat: Option<f64>,
    pub t_omega: f64,
    pub transition: Transition,
}

impl PiProtocol {
    pub fn peak(&self, model: &LevelModel) -> Result<f64> {
        match self.omega_hat {
            Some(p) => Ok(p),
            None => gaussian_peak_for_area(model, self.transition, self.t_omega, std::f64::consts::PI),
        }
    }
}

/// Two consecutive pi pulses `0 -> 1 -> 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialPiProtocol {
    pub t_omega: f64,
    /// Pulse separation in pulse widths.
    pub separation_widths: f64,
    #[serde(default = "yes")]
    pub second_pulse: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    Ramp(RampProtocol),
    #[serde(rename = "scrap_1atom", alias = "delay_scan")]
    Scrap1Atom(ScrapProtocol),
    #[serde(rename = "scrap_2atom")]
    Scrap2Atom(SequentialScrapProtocol),
    PiPulse(PiProtocol),
    SequentialPi(SequentialPiProtocol),
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Ramp(_) => "ramp",
            Protocol::Scrap1Atom(_) => "scrap_1atom",
            Protocol::Scrap2Atom(_) => "scrap_2atom",
            Protocol::PiPulse(_) => "pi_pulse",
            Protocol::SequentialPi(_) => "sequential_pi",
        }
    }

    /// Level whose final population is the figure of merit.
    pub fn target(&self) -> usize {
        match self {
            Protocol::Ramp(p) => p.target,
            Protocol::Scrap1Atom(_) => 1,
            Protocol::Scrap2Atom(_) => 2,
            Protocol::PiPulse(p) => p.transition.lower() + 1,
            Protocol::SequentialPi(p) => {
                if p.second_pulse {
                    2
                } else {
                    1
                }
            }
        }
    }

    /// Names accepted by [`Protocol::set`] and [`Protocol::get`].
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Protocol::Ramp(_) => &["omega_l", "rate", "switch_time"],
            Protocol::Scrap1Atom(_) => &[
                "omega_hat",
                "t_omega",
                "delta_hat",
                "width_ratio",
                "separation_ratio",
                "delay",
            ],
            Protocol::Scrap2Atom(_) => &[
                "omega_hat",
                "t_omega",
                "delta_hat",
                "width_ratio",
                "separation_ratio",
                "ramp_fraction",
            ],
            Protocol::PiPulse(_) => &["omega_hat", "t_omega"],
            Protocol::SequentialPi(_) => &["t_omega", "separation_widths"],
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match (self, name) {
            (Protocol::Ramp(p), "omega_l") => &mut p.omega_l,
            (Protocol::Ramp(p), "rate") => &mut p.rate,
            (Protocol::Ramp(p), "switch_time") => p.switch_time.get_or_insert(0.0),
            (Protocol::Scrap1Atom(p), "omega_hat") => &mut p.omega_hat,
            (Protocol::Scrap1Atom(p), "t_omega") => &mut p.t_omega,
            (Protocol::Scrap1Atom(p), "delta_hat") => &mut p.delta_hat,
            (Protocol::Scrap1Atom(p), "width_ratio") => &mut p.width_ratio,
            (Protocol::Scrap1Atom(p), "separation_ratio") => &mut p.separation_ratio,
            (Protocol::Scrap1Atom(p), "delay" | "delta_tau") => &mut p.delay,
            (Protocol::Scrap2Atom(p), "omega_hat") => &mut p.omega_hat,
            (Protocol::Scrap2Atom(p), "t_omega") => &mut p.t_omega,
            (Protocol::Scrap2Atom(p), "delta_hat") => &mut p.delta_hat,
            (Protocol::Scrap2Atom(p), "width_ratio") => &mut p.width_ratio,
            (Protocol::Scrap2Atom(p), "separation_ratio") => &mut p.separation_ratio,
            (Protocol::Scrap2Atom(p), "ramp_fraction") => &mut p.ramp_fraction,
            (Protocol::PiPulse(p), "omega_hat") => p.omega_hat.get_or_insert(0.0),
            (Protocol::PiPulse(p), "t_omega") => &mut p.t_omega,
            (Protocol::SequentialPi(p), "t_omega") => &mut p.t_omega,
            (Protocol::SequentialPi(p), "separation_widths") => &mut p.separation_widths,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let protocol = self.name();
        let slot = self.slot(name).ok_or_else(|| Error::UnknownParameter {
            protocol,
            name: name.to_string(),
        })?;
        *slot = value;
        Ok(())
    }

    /// Current value of a parameter, resolving defaults against the model.
    pub fn get(&self, model: &LevelModel, name: &str) -> Result<f64> {
        if let Protocol::PiPulse(p) = self {
            if name == "omega_hat" {
                return p.peak(model);
            }
        }
        let mut copy = self.clone();
        let protocol = self.name();
        let unset = matches!((self, name), (Protocol::Ramp(RampProtocol { switch_time: None, .. }), "switch_time"));
        if unset {
            return Err(Error::InvalidSweep("switch_time is not set".into()));
        }
        copy.slot(name).map(|v| *v).ok_or_else(|| Error::UnknownParameter {
            protocol,
            name: name.to_string(),
        })
    }

    pub fn schedule(&self, model: &LevelModel) -> Result<PulseSchedule> {
        match self {
            Protocol::Ramp(p) => p.schedule(model),
            Protocol::Scrap1Atom(p) => {
                let resonance = model.resonance_detunings().zero_one;
                Ok(build_scrap_schedule(&p.pulses(), resonance)?.schedule)
            }
            Protocol::Scrap2Atom(p) => {
                let r = model.resonance_detunings();
                Ok(build_sequential_scrap_schedule(&p.pulses(), r.zero_one, r.one_two)?.schedule)
            }
            Protocol::PiPulse(p) => {
                build_resonant_gaussian(model, p.transition, p.peak(model)?, p.t_omega)
            }
            Protocol::SequentialPi(p) => build_sequential_pi(
                model,
                p.t_omega,
                p.separation_widths * p.t_omega,
                p.second_pulse,
            ),
        }
    }

    /// Peak drive amplitude of the schedule (rad/s).
    pub fn peak_drive(&self, model: &LevelModel) -> Result<f64> {
        Ok(match self {
            Protocol::Ramp(p) => p.omega_l,
            Protocol::Scrap1Atom(p) => p.omega_hat,
            Protocol::Scrap2Atom(p) => p.omega_hat,
            Protocol::PiPulse(p) => p.peak(model)?,
            Protocol::SequentialPi(p) => gaussian_peak_for_area(
                model,
                Transition::ZeroOne,
                p.t_omega,
                std::f64::consts::PI,
            )?,
        })
    }

    /// Landau-Zener estimate of the target population, for ramps only.
    pub fn lz_prediction(&self, model: &LevelModel) -> Result<Option<f64>> {
        let Protocol::Ramp(p) = self else {
            return Ok(None);
        };
        let hbar = model.hbar();
        Ok(Some(match p.target {
            1 => {
                let gap = hbar * model.rabi_coupling(0, p.omega_l)?.abs();
                lz_probability(gap, p.rate, hbar).probability
            }
            _ => sequential_lz(model, p.omega_l, p.rate)?,
        }))
    }

    pub fn margin_names(&self) -> &'static [&'static str] {
        match self {
            Protocol::Ramp(_) => &["margin_two_level", "margin_single_particle", "alpha_ad"],
            Protocol::Scrap1Atom(_) => &[
                "margin_two_level",
                "margin_single_particle",
                "margin_scrap_adiabatic",
                "margin_scrap_pump_width",
                "margin_scrap_diabatic",
            ],
            _ => &["margin_two_level", "margin_single_particle"],
        }
    }

    /// Validity inputs describing this protocol.
    pub fn validity_inputs(&self) -> ValidityInputs {
        match self {
            Protocol::Ramp(p) => ValidityInputs {
                ramp_rate: Some(p.rate),
                ..Default::default()
            },
            Protocol::Scrap1Atom(p) => ValidityInputs {
                scrap: Some(p.pulses()),
                ..Default::default()
            },
            _ => ValidityInputs::default(),
        }
    }

    /// Margins in the order of [`Protocol::margin_names`].
    pub fn margins(&self, model: &LevelModel) -> Result<Vec<f64>> {
        let report = validity_check(model, self.peak_drive(model)?, &self.validity_inputs())?;
        let mut out = vec![report.two_level.margin, report.single_particle.margin];
        match self {
            Protocol::Ramp(_) => out.push(report.alpha_ad.unwrap_or(f64::NAN)),
            Protocol::Scrap1Atom(_) => {
                for c in [report.scrap_adiabatic, report.scrap_pump_width, report.scrap_diabatic] {
                    out.push(c.map_or(f64::NAN, |c| c.margin));
                }
            }
            _ => {}
        }
        Ok(out)
    }
}
