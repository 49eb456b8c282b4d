//! Truncated ladder of collective states `|0>, |1>, ..., |n_max>`.
//!
//! State `|n>` has `n` atoms in the tweezer ground state. Energies are measured
//! from `|0>`; a detuning `delta` lowers level `n` by `n * hbar * delta`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::DerivedParams;

/// Resonant detunings of the one-atom, two-atom and second-atom transitions (rad/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonances {
    pub zero_one: f64,
    pub zero_two: f64,
    pub one_two: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelModel {
    n_max: usize,
    bare_energy: Vec<f64>,
    rabi_unit: Vec<f64>,
    derived: DerivedParams,
}

impl LevelModel {
    /// Three-level model (`n_max = 2`).
    pub fn new(derived: DerivedParams) -> Self {
        Self::with_n_max(derived, 2).expect("n_max = 2 is valid")
    }

    /// Ladder truncated at `n_max >= 1`.
    ///
    /// Beyond two atoms the energies are extrapolated with one collisional
    /// shift per atom pair and the couplings with the `sqrt(n + 1)` law.
    pub fn with_n_max(derived: DerivedParams, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::LevelOutOfRange { index: 0, max: 0 });
        }
        let bare_energy = (0..=n_max)
            .map(|n| {
                let nf = n as f64;
                let pairs = nf * (nf - 1.0) / 2.0;
                nf * derived.zero_point_energy + pairs * derived.delta_e_coll
                    + derived.scattering_shift(n)
                    - nf * derived.mu
            })
            .collect();
        let rabi_unit = (0..n_max)
            .map(|n| derived.overlap_factor * ((n + 1) as f64).sqrt())
            .collect();
        Ok(LevelModel {
            n_max,
            bare_energy,
            rabi_unit,
            derived,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn hbar(&self) -> f64 {
        self.derived.hbar
    }

    /// Energy of `|n>` at zero detuning (J).
    pub fn bare_energy(&self, n: usize) -> Result<f64> {
        self.check_level(n)?;
        Ok(self.bare_energy[n])
    }

    /// Energy of `|n>` at the given detuning (J).
    pub fn level_energy(&self, n: usize, detuning: f64) -> Result<f64> {
        self.check_level(n)?;
        Ok(self.bare_energy[n] - n as f64 * self.hbar() * detuning)
    }

    /// Coupling of `|n>` to `|n + 1>` per unit drive.
    pub fn rabi_unit(&self, n: usize) -> Result<f64> {
        if n >= self.n_max {
            return Err(Error::LevelOutOfRange {
                index: n,
                max: self.n_max - 1,
            });
        }
        Ok(self.rabi_unit[n])
    }

    /// Collective Rabi frequency between `|n>` and `|n + 1>` (rad/s).
    pub fn rabi_coupling(&self, n: usize, omega_l: f64) -> Result<f64> {
        Ok(self.rabi_unit(n)? * omega_l)
    }

    /// Effective second-order `|0>` to `|2>` coupling, a diagnostic only (rad/s).
    pub fn two_photon_rabi(&self, omega_l: f64) -> Result<f64> {
        if self.n_max < 2 {
            return Err(Error::LevelOutOfRange { index: 2, max: self.n_max });
        }
        let e2 = self.bare_energy[2];
        if e2 == 0.0 {
            return Err(Error::Singular("two-atom resonance energy is zero"));
        }
        let first = self.rabi_coupling(0, omega_l)?;
        let second = self.rabi_coupling(1, omega_l)?;
        Ok(first * second / (e2 / (2.0 * self.hbar())))
    }

    /// Ratio of `E2` to `hbar` times the first coupling; the perturbative
    /// two-photon picture needs this to be large.
    pub fn two_photon_margin(&self, omega_l: f64) -> f64 {
        let first = self.rabi_unit[0] * omega_l.abs();
        self.derived.e2.abs() / (self.hbar() * first)
    }

    pub fn resonance_detunings(&self) -> Resonances {
        let d = &self.derived;
        Resonances {
            zero_one: d.e1 / d.hbar,
            zero_two: d.e2 / (2.0 * d.hbar),
            one_two: (d.e2 - d.e1) / d.hbar,
        }
    }

    /// Real tridiagonal generator `H / hbar` in rad/s.
    ///
    /// `diag` must hold `dim()` entries and `off` `dim() - 1` entries.
    pub fn generator(&self, detuning: f64, omega_l: f64, diag: &mut [f64], off: &mut [f64]) {
        let hbar = self.hbar();
        for (n, d) in diag.iter_mut().enumerate() {
            *d = self.bare_energy[n] / hbar - n as f64 * detuning;
        }
        for (o, &u) in off.iter_mut().zip(&self.rabi_unit) {
            *o = 0.5 * u * omega_l;
        }
    }

    /// Dense Hamiltonian (J). Hermitian by construction.
    pub fn hamiltonian_matrix(&self, detuning: f64, omega_l: f64) -> DMatrix<Complex64> {
        let dim = self.dim();
        let hbar = self.hbar();
        let mut diag = vec![0.0; dim];
        let mut off = vec![0.0; dim - 1];
        self.generator(detuning, omega_l, &mut diag, &mut off);
        let mut h = DMatrix::zeros(dim, dim);
        for n in 0..dim {
            h[(n, n)] = Complex64::new(self.level_energy(n, detuning).unwrap(), 0.0);
        }
        for n in 0..dim - 1 {
            let v = Complex64::new(hbar * off[n], 0.0);
            h[(n, n + 1)] = v;
            h[(n + 1, n)] = v.conj();
        }
        h
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::LevelOutOfRange {
                index: n,
                max: self.n_max,
            })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{derive_all, PhysicalSystem, HBAR};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model() -> LevelModel {
        let sys = PhysicalSystem::rb87(2.0 * PI * 30e3, 2.0 * PI * 100.0, 1e3, 3e19);
        LevelModel::new(derive_all(&sys).unwrap())
    }

    #[test]
    fn level_energies_at_resonance() {
        let m = model();
        let r = m.resonance_detunings();
        assert_eq!(m.level_energy(0, 123.0).unwrap(), 0.0);
        assert!(m.level_energy(1, r.zero_one).unwrap().abs() < 1e-12 * m.derived().e1);
        assert!(m.level_energy(2, r.zero_two).unwrap().abs() < 1e-12 * m.derived().e2);
        assert!(m.level_energy(3, 0.0).is_err());
    }

    #[test]
    fn bare_energies_reproduce_resonance_energies() {
        let m = model();
        assert_eq!(m.bare_energy(0).unwrap(), 0.0);
        assert_relative_eq!(m.bare_energy(1).unwrap(), m.derived().e1, max_relative = 1e-14);
        assert_relative_eq!(m.bare_energy(2).unwrap(), m.derived().e2, max_relative = 1e-14);
    }

    #[test]
    fn rabi_couplings() {
        let m = model();
        assert_eq!(m.rabi_coupling(0, 0.0).unwrap(), 0.0);
        let first = m.rabi_coupling(0, 4e3).unwrap();
        assert!((first - 2.28e3).abs() < 0.03e3, "{first}");
        let second = m.rabi_coupling(1, 4e3).unwrap();
        assert_relative_eq!(second / first, 2f64.sqrt(), max_relative = 1e-14);
        assert!(m.rabi_coupling(2, 1.0).is_err());
    }

    #[test]
    fn two_photon_diagnostic() {
        let m = model();
        assert_eq!(m.two_photon_rabi(0.0).unwrap(), 0.0);
        let one = m.two_photon_rabi(4e3).unwrap();
        assert!(one.abs() < 0.05 * m.rabi_coupling(0, 4e3).unwrap());
        assert_relative_eq!(m.two_photon_rabi(8e3).unwrap(), 4.0 * one, max_relative = 1e-14);
    }

    #[test]
    fn resonance_ordering() {
        let m = model();
        let r = m.resonance_detunings();
        assert!(r.zero_one < r.zero_two && r.zero_two < r.one_two);
        let gap = (r.one_two - r.zero_one) * HBAR;
        assert_relative_eq!(gap, m.derived().delta_e_coll, max_relative = 1e-8);
    }

    #[test]
    fn harmonic_ladder_is_degenerate() {
        let mut d = model().derived().clone();
        d.delta_e_coll = 0.0;
        d.e2 = 2.0 * d.e1;
        let r = LevelModel::new(d).resonance_detunings();
        assert_relative_eq!(r.zero_one, r.zero_two, max_relative = 1e-14);
        assert_relative_eq!(r.zero_one, r.one_two, max_relative = 1e-14);
    }

    #[test]
    fn hamiltonian_structure() {
        let m = model();
        let h0 = m.hamiltonian_matrix(1e5, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(h0[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
        let h = m.hamiltonian_matrix(2.9e5, 4e3);
        assert_eq!(h, h.adjoint());
        let trace: f64 = (0..3).map(|n| m.level_energy(n, 2.9e5).unwrap()).sum();
        assert_relative_eq!(h.trace().re, trace, max_relative = 1e-14);
        assert_eq!(h[(0, 2)], Complex64::new(0.0, 0.0));
        assert_relative_eq!(
            h[(0, 1)].re,
            HBAR * m.rabi_coupling(0, 4e3).unwrap() / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn extended_ladder() {
        let m = LevelModel::with_n_max(model().derived().clone(), 4).unwrap();
        assert_eq!(m.dim(), 5);
        let d = m.derived();
        let e3 = 3.0 * d.zero_point_energy + 3.0 * d.delta_e_coll + 3.0 * d.e_sc_per_atom
            - 3.0 * d.mu;
        assert_relative_eq!(m.bare_energy(3).unwrap(), e3, max_relative = 1e-14);
        assert_relative_eq!(
            m.rabi_unit(3).unwrap() / m.rabi_unit(0).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert!(LevelModel::with_n_max(d.clone(), 0).is_err());
    }
}
