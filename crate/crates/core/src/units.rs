//! Experimental inputs and the derived energies and couplings of the reduced model.
//!
//! All quantities are SI unless a [`UnitSystem`] with a rescaled reduced Planck
//! constant is supplied. Frequencies are always angular (rad/s).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Mass of a rubidium-87 atom (kg).
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;
/// Default s-wave scattering length for the rubidium-87 ground-state pair (m).
///
/// External data, roughly 100 Bohr radii for all hyperfine combinations of interest.
pub const RB87_SCATTERING_LENGTH: f64 = 100.4 * BOHR_RADIUS;

/// Ratio above which the tweezer is considered much steeper than the reservoir.
pub const STEEPNESS_RATIO: f64 = 10.0;

/// A consistent unit system, characterised by the numerical value of ħ in it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
}

impl UnitSystem {
    pub const SI: UnitSystem = UnitSystem { hbar: HBAR };

    /// Unit system whose mass, length and time units are the given SI amounts.
    pub fn scaled(mass_unit: f64, length_unit: f64, time_unit: f64) -> Self {
        UnitSystem {
            hbar: HBAR * time_unit / (mass_unit * length_unit * length_unit),
        }
    }

    pub fn oscillator_length(&self, mass: f64, angular_frequency: f64) -> Result<f64> {
        ensure_positive("mass", mass)?;
        ensure_positive("angular frequency", angular_frequency)?;
        Ok((self.hbar / (mass * angular_frequency)).sqrt())
    }

    pub fn coupling_constant(&self, mass: f64, scattering_length: f64) -> Result<f64> {
        ensure_positive("mass", mass)?;
        Ok(4.0 * PI * self.hbar * self.hbar * scattering_length / mass)
    }
}

/// Chemical potential of the reservoir.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChemicalPotential {
    /// Uniform mean-field estimate `g_bb * n_b` at peak density.
    MeanField,
    /// Externally supplied value, e.g. a Thomas-Fermi result (J).
    Given(f64),
}

/// Raw experimental inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSystem {
    /// Atomic mass (kg).
    pub atom_mass: f64,
    /// Tweezer trap frequencies along x, y, z (rad/s).
    pub nu_a: [f64; 3],
    /// Reservoir trap frequencies along x, y, z (rad/s).
    pub nu_b: [f64; 3],
    /// Number of condensed atoms.
    pub atom_number: f64,
    /// Peak condensate density (m^-3).
    pub peak_density: f64,
    /// Scattering lengths (m).
    pub a_aa: f64,
    pub a_bb: f64,
    pub a_ab: f64,
    pub chemical_potential: ChemicalPotential,
}

/// Non-fatal findings about a [`PhysicalSystem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamWarning {
    /// The tweezer is not much steeper than the reservoir.
    ShallowTweezer { ratio: f64 },
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::ShallowTweezer { ratio } => write!(
                f,
                "tweezer/reservoir frequency ratio {ratio:.3} is below {STEEPNESS_RATIO}"
            ),
        }
    }
}

impl PhysicalSystem {
    /// Rubidium-87 with isotropic traps and the default scattering lengths.
    pub fn rb87(nu_a: f64, nu_b: f64, atom_number: f64, peak_density: f64) -> Self {
        PhysicalSystem {
            atom_mass: RB87_MASS,
            nu_a: [nu_a; 3],
            nu_b: [nu_b; 3],
            atom_number,
            peak_density,
            a_aa: RB87_SCATTERING_LENGTH,
            a_bb: RB87_SCATTERING_LENGTH,
            a_ab: RB87_SCATTERING_LENGTH,
            chemical_potential: ChemicalPotential::MeanField,
        }
    }

    /// Checks hard invariants and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<ParamWarning>> {
        ensure_positive("atom mass", self.atom_mass)?;
        for &nu in self.nu_a.iter().chain(&self.nu_b) {
            ensure_positive("trap frequency", nu)?;
        }
        ensure_positive("atom number", self.atom_number)?;
        ensure_positive("peak density", self.peak_density)?;
        for a in [self.a_aa, self.a_bb, self.a_ab] {
            if !a.is_finite() {
                return Err(Error::NonFinite("scattering length".into()));
            }
        }
        if let ChemicalPotential::Given(mu) = self.chemical_potential {
            if !mu.is_finite() {
                return Err(Error::NonFinite("chemical potential".into()));
            }
        }
        let ratio = min3(self.nu_a) / min3(self.nu_b);
        Ok(if ratio < STEEPNESS_RATIO {
            vec![ParamWarning::ShallowTweezer { ratio }]
        } else {
            Vec::new()
        })
    }
}

fn min3(v: [f64; 3]) -> f64 {
    v[0].min(v[1]).min(v[2])
}

/// Every derived quantity of the reduced model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Value of ħ in the unit system these numbers are expressed in.
    pub hbar: f64,
    /// Tweezer ground-state widths per axis (m).
    pub osc_lengths: [f64; 3],
    /// Interaction strengths (J m^3).
    pub g_aa: f64,
    pub g_bb: f64,
    pub g_ab: f64,
    /// Reservoir chemical potential (J).
    pub mu: f64,
    /// Collisional shift of two atoms sharing the tweezer ground state (J).
    pub delta_e_coll: f64,
    /// Scattering shift with the condensate per tweezer atom, `E_sc(1)` (J).
    pub e_sc_per_atom: f64,
    /// Overlap factor mapping the bare drive onto the `|0>` to `|1>` coupling.
    pub overlap_factor: f64,
    /// Tweezer zero-point energy `sum(hbar nu_a) / 2` (J).
    pub zero_point_energy: f64,
    /// One-atom resonance energy (J).
    pub e1: f64,
    /// Two-atom resonance energy (J).
    pub e2: f64,
    /// Smallest tweezer trap frequency (rad/s).
    pub min_nu_a: f64,
    pub warnings: Vec<ParamWarning>,
}

impl DerivedParams {
    /// Scattering shift for `n` tweezer atoms (J).
    pub fn scattering_shift(&self, n: usize) -> f64 {
        n as f64 * self.e_sc_per_atom
    }

    /// Converts an energy to an angular frequency.
    pub fn to_rate(&self, energy: f64) -> f64 {
        energy / self.hbar
    }
}

/// `sqrt(hbar / (M nu))` in SI.
pub fn oscillator_length(mass: f64, angular_frequency: f64) -> Result<f64> {
    UnitSystem::SI.oscillator_length(mass, angular_frequency)
}

/// `4 pi hbar^2 a / M` in SI.
pub fn coupling_constant(mass: f64, scattering_length: f64) -> Result<f64> {
    UnitSystem::SI.coupling_constant(mass, scattering_length)
}

/// Mean-field or user-supplied chemical potential, in the units of `g_bb`.
pub fn chemical_potential(system: &PhysicalSystem, g_bb: f64) -> f64 {
    match system.chemical_potential {
        ChemicalPotential::MeanField => g_bb * system.peak_density,
        ChemicalPotential::Given(mu) => mu,
    }
}

/// Two-atom collisional shift for a Gaussian ground state of the given widths.
pub fn collision_shift(g_aa: f64, osc_lengths: [f64; 3]) -> Result<f64> {
    for a in osc_lengths {
        ensure_positive("oscillator length", a)?;
    }
    let volume = osc_lengths[0] * osc_lengths[1] * osc_lengths[2];
    Ok(g_aa / ((2.0 * PI).powf(1.5) * volume))
}

/// `sqrt(n_b)` times the integral of the Gaussian ground state.
pub fn overlap_factor(osc_lengths: [f64; 3], peak_density: f64) -> Result<f64> {
    for a in osc_lengths {
        ensure_positive("oscillator length", a)?;
    }
    if peak_density.is_nan() || peak_density < 0.0 {
        return Err(Error::NonPositive {
            quantity: "peak density",
            value: peak_density,
        });
    }
    let per_axis = |a: f64| 2f64.sqrt() * PI.powf(0.25) * a.sqrt();
    Ok(peak_density.sqrt() * osc_lengths.iter().map(|&a| per_axis(a)).product::<f64>())
}

/// Shift of `n` tweezer atoms from the condensate, with the condensate flat over the tweezer.
///
/// The atom number drops out because the normalised reservoir density times `N`
/// is the peak density.
pub fn scattering_shift(g_ab: f64, peak_density: f64, n: usize) -> f64 {
    g_ab * n as f64 * peak_density
}

/// Derives every model quantity in SI.
pub fn derive_all(system: &PhysicalSystem) -> Result<DerivedParams> {
    derive_in(system, UnitSystem::SI)
}

/// Derives every model quantity with all inputs expressed in `units`.
pub fn derive_in(system: &PhysicalSystem, units: UnitSystem) -> Result<DerivedParams> {
    let warnings = system.validate()?;
    let m = system.atom_mass;
    let mut osc_lengths = [0.0; 3];
    for (len, &nu) in osc_lengths.iter_mut().zip(&system.nu_a) {
        *len = units.oscillator_length(m, nu)?;
    }
    let g_aa = units.coupling_constant(m, system.a_aa)?;
    let g_bb = units.coupling_constant(m, system.a_bb)?;
    let g_ab = units.coupling_constant(m, system.a_ab)?;
    let mu = chemical_potential(system, g_bb);
    let delta_e_coll = collision_shift(g_aa, osc_lengths)?;
    let e_sc_per_atom = scattering_shift(g_ab, system.peak_density, 1);
    let overlap_factor = overlap_factor(osc_lengths, system.peak_density)?;
    let zero_point_energy = 0.5 * units.hbar * system.nu_a.iter().sum::<f64>();
    let e1 = zero_point_energy + e_sc_per_atom - mu;
    let e2 = 2.0 * zero_point_energy + delta_e_coll + 2.0 * e_sc_per_atom - 2.0 * mu;
    let derived = DerivedParams {
        hbar: units.hbar,
        osc_lengths,
        g_aa,
        g_bb,
        g_ab,
        mu,
        delta_e_coll,
        e_sc_per_atom,
        overlap_factor,
        zero_point_energy,
        e1,
        e2,
        min_nu_a: min3(system.nu_a),
        warnings,
    };
    let finite = [mu, delta_e_coll, e_sc_per_atom, overlap_factor, e1, e2]
        .iter()
        .all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite("derived parameters".into()));
    }
    Ok(derived)
}
