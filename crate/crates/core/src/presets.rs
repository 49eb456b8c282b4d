//! Named parameter sets: a physical system, a protocol and default sweep axes.
//!
//! All values are SI: frequencies in rad/s, times in s, densities in m^-3.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{
    Axis, PiProtocol, Protocol, RampProtocol, ScrapProtocol, SequentialPiProtocol,
    SequentialScrapProtocol,
};
use crate::levels::LevelModel;
use crate::pulses::Transition;
use crate::units::{derive_all, PhysicalSystem};

pub const PRESET_NAMES: [&str; 7] = [
    "fig3a",
    "fig3b",
    "fig4",
    "fig4_delay",
    "fig6",
    "fig7",
    "fig7_sequential",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub system: PhysicalSystem,
    /// Highest tweezer occupation kept in the model.
    pub n_max: usize,
    pub protocol: Protocol,
    /// Default sweep axes; empty for single-shot presets.
    pub axes: Vec<Axis>,
}

impl Preset {
    /// Level model of the preset system.
    pub fn model(&self) -> Result<LevelModel> {
        LevelModel::with_n_max(derive_all(&self.system)?, self.n_max)
    }
}

/// Reference rubidium setup: 30 kHz tweezer in a 100 Hz reservoir of 1000
/// atoms at peak density 3e19 m^-3.
pub fn reference_system() -> PhysicalSystem {
    PhysicalSystem::rb87(2.0 * PI * 30e3, 2.0 * PI * 100.0, 1e3, 3e19)
}

fn scrap_one_atom() -> ScrapProtocol {
    ScrapProtocol {
        omega_hat: 15e3,
        t_omega: 1e-3,
        delta_hat: 22e3,
        width_ratio: 2.0,
        separation_ratio: 0.6,
        delay: 0.0,
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let make = |description: &str, system: PhysicalSystem, protocol: Protocol, axes: Vec<Axis>| Preset {
        name: name.to_string(),
        description: description.to_string(),
        system,
        n_max: 2,
        protocol,
        axes,
    };
    let ramp = |omega_l: f64| RampProtocol {
        omega_l,
        rate: 1e6,
        target: 1,
        switch_time: Some(1e-3),
        detuning_start: None,
        detuning_end: None,
    };
    let preset = match name {
        "fig3a" => make(
            "linear detuning ramp, 30 kHz tweezer, 4 kHz drive",
            reference_system(),
            Protocol::Ramp(ramp(4e3)),
            vec![Axis::log("rate", 1e5, 1e8, 61)],
        ),
        "fig3b" => make(
            "linear detuning ramp, 100 kHz tweezer, 30 kHz drive",
            PhysicalSystem {
                nu_a: [2.0 * PI * 100e3; 3],
                ..reference_system()
            },
            Protocol::Ramp(ramp(30e3)),
            vec![Axis::log("rate", 1e6, 1e9, 61)],
        ),
        "fig4" => make(
            "Stark-chirped passage of one atom over pump peak and width",
            reference_system(),
            Protocol::Scrap1Atom(scrap_one_atom()),
            vec![
                Axis::linear("omega_hat", 0.0, 30e3, 41),
                Axis::linear("t_omega", 0.2e-3, 1.8e-3, 41),
            ],
        ),
        "fig4_delay" => make(
            "Stark-chirped passage of one atom over pump delay",
            reference_system(),
            Protocol::Scrap1Atom(scrap_one_atom()),
            vec![Axis::linear("delay", -5e-3, 2e-3, 141)],
        ),
        "fig6" => make(
            "Stark-chirped passage of two atoms over pump peak and width",
            reference_system(),
            Protocol::Scrap2Atom(SequentialScrapProtocol {
                omega_hat: 15e3,
                t_omega: 2e-3,
                delta_hat: 48e3,
                width_ratio: 2.0,
                separation_ratio: 0.75,
                ramp_fraction: 0.25,
            }),
            vec![
                Axis::linear("omega_hat", 0.0, 30e3, 41),
                Axis::linear("t_omega", 0.5e-3, 4.5e-3, 41),
            ],
        ),
        "fig7" => make(
            "resonant Gaussian pulse on the 0-1 transition",
            reference_system(),
            Protocol::PiPulse(PiProtocol {
                omega_hat: None,
                t_omega: 1.5e-3,
                transition: Transition::ZeroOne,
            }),
            vec![
                Axis::linear("omega_hat", 0.0, 12e3, 41),
                Axis::linear("t_omega", 0.2e-3, 3e-3, 41),
            ],
        ),
        "fig7_sequential" => make(
            "two consecutive pi pulses, 0-1 then 1-2",
            reference_system(),
            Protocol::SequentialPi(SequentialPiProtocol {
                t_omega: 2e-3,
                separation_widths: 10.0,
                second_pulse: true,
            }),
            Vec::new(),
        ),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(preset)
}
