//! Cross-module physical properties checked against independent oracles.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use tweezer_core::analytics::{dressed, lz_probability, min_transfer_time, ramp_rate_bound};
use tweezer_core::experiments::Protocol;
use tweezer_core::levels::LevelModel;
use tweezer_core::presets::{preset, reference_system};
use tweezer_core::propagator::{propagate, Drive, StateVector, StepControl, TimeReversed};
use tweezer_core::pulses::{
    build_ramp_schedule, build_scrap_schedule, crossing_times, pulse_area, Envelope, PulseSchedule,
    ScrapPulses,
};
use tweezer_core::units::{derive_all, derive_in, PhysicalSystem, UnitSystem};

fn reference_model() -> LevelModel {
    LevelModel::new(derive_all(&reference_system()).unwrap())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn ground_state(width: f64) -> impl Fn(f64) -> f64 {
    move |x| (PI * width * width).powf(-0.25) * (-x * x / (2.0 * width * width)).exp()
}

fn distance(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn final_state<D: Drive>(model: &LevelModel, drive: &D, initial: &StateVector, step: Option<f64>) -> StateVector {
    let control = StepControl {
        step,
        ..StepControl::endpoints()
    };
    propagate(model, drive, initial, &control).unwrap().final_state().clone()
}

fn trap_system() -> impl Strategy<Value = PhysicalSystem> {
    (10e3..200e3f64, 5e3..200e3f64, 5e3..200e3f64, 1e18..1e20f64, 50.0..150.0f64).prop_map(
        |(fx, fy, fz, density, a0)| PhysicalSystem {
            nu_a: [2.0 * PI * fx, 2.0 * PI * fy, 2.0 * PI * fz],
            peak_density: density,
            a_aa: a0 * tweezer_core::units::BOHR_RADIUS,
            ..reference_system()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_do_not_depend_on_the_unit_system(
        system in trap_system(),
        mass_unit in 1e-27..1e-24f64,
        length_unit in 1e-8..1e-5f64,
        time_unit in 1e-6..1e-2f64,
    ) {
        let si = derive_all(&system).unwrap();
        let scaled_system = PhysicalSystem {
            atom_mass: system.atom_mass / mass_unit,
            nu_a: system.nu_a.map(|v| v * time_unit),
            nu_b: system.nu_b.map(|v| v * time_unit),
            peak_density: system.peak_density * length_unit.powi(3),
            a_aa: system.a_aa / length_unit,
            a_bb: system.a_bb / length_unit,
            a_ab: system.a_ab / length_unit,
            ..system.clone()
        };
        let units = UnitSystem::scaled(mass_unit, length_unit, time_unit);
        let scaled = derive_in(&scaled_system, units).unwrap();
        let rate = |e: f64, d: &tweezer_core::units::DerivedParams| e / d.hbar;
        for (e_si, e_sc) in [(si.e1, scaled.e1), (si.e2, scaled.e2), (si.delta_e_coll, scaled.delta_e_coll), (si.mu, scaled.mu)] {
            prop_assert!((rate(e_si, &si) - rate(e_sc, &scaled) / time_unit).abs() <= 1e-9 * rate(e_si, &si).abs());
        }
        for k in 0..3 {
            prop_assert!((si.osc_lengths[k] - scaled.osc_lengths[k] * length_unit).abs() <= 1e-12 * si.osc_lengths[k]);
        }
        // The coupling factor is dimensionless.
        prop_assert!((si.overlap_factor - scaled.overlap_factor).abs() <= 1e-9 * si.overlap_factor);
    }

    #[test]
    fn overlap_integrals_match_quadrature(system in trap_system()) {
        let d = derive_all(&system).unwrap();
        let mut fourth = 1.0;
        let mut first = 1.0;
        for &a in &d.osc_lengths {
            let phi = ground_state(a);
            fourth *= simpson(|x| phi(x).powi(4), -12.0 * a, 12.0 * a, 4000);
            first *= simpson(&phi, -12.0 * a, 12.0 * a, 4000);
        }
        prop_assert!((d.delta_e_coll / (d.g_aa * fourth) - 1.0).abs() < 1e-6);
        prop_assert!((d.overlap_factor / (system.peak_density.sqrt() * first) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_atom_resonance_exceeds_twice_one_atom(system in trap_system()) {
        let d = derive_all(&system).unwrap();
        prop_assert!(d.e2 > 2.0 * d.e1);
        prop_assert!((d.e2 - 2.0 * d.e1 - d.delta_e_coll).abs() <= 1e-9 * d.e2.abs());
    }

    #[test]
    fn hamiltonian_is_hermitian_and_linear_in_detuning(
        n_max in 1usize..5,
        det_a in -1e6..1e6f64,
        det_b in -1e6..1e6f64,
        omega_l in 0.0..1e5f64,
        s in -3.0..3.0f64,
    ) {
        let model = LevelModel::with_n_max(derive_all(&reference_system()).unwrap(), n_max).unwrap();
        let ha = model.hamiltonian_matrix(det_a, omega_l);
        prop_assert_eq!(ha.nrows(), n_max + 1);
        prop_assert!((&ha - ha.adjoint()).norm() <= 1e-15 * ha.norm());
        let hb = model.hamiltonian_matrix(det_b, omega_l);
        let hc = model.hamiltonian_matrix(det_a + s * (det_b - det_a), omega_l);
        let lin = &ha + (&hb - &ha) * Complex64::new(s, 0.0);
        prop_assert!((&hc - lin).norm() <= 1e-12 * (ha.norm() + hb.norm()));
    }

    #[test]
    fn dressed_energies_match_eigensolver(det in 2.6e5..3.1e5f64, omega_l in 1.0..5e4f64) {
        let model = reference_model();
        let hbar = model.hbar();
        let pair = dressed(&model, det, omega_l);
        let h = model.hamiltonian_matrix(det, omega_l);
        let block = Matrix2::new(h[(0, 0)].re, h[(0, 1)].re, h[(1, 0)].re, h[(1, 1)].re) / hbar;
        let eig = SymmetricEigen::new(block);
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        let scale = hi.abs().max(lo.abs()).max(1.0);
        prop_assert!((pair.epsilon_plus / hbar - hi).abs() <= 1e-12 * scale * 10.0);
        prop_assert!((pair.epsilon_minus / hbar - lo).abs() <= 1e-12 * scale * 10.0);
        // Upper eigenvector is sin(theta) |0> + cos(theta) |1>, up to sign.
        let k = if eig.eigenvalues[0] > eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(k);
        prop_assert!((v[0].abs() - pair.theta.sin()).abs() < 1e-9);
        prop_assert!((v[1].abs() - pair.theta.cos()).abs() < 1e-9);
    }

    #[test]
    fn lz_probability_is_monotone(gap in 1e-32..1e-29f64, rate in 1e3..1e9f64, f in 1.01..3.0f64) {
        let hbar = tweezer_core::units::HBAR;
        let p = lz_probability(gap, rate, hbar).probability;
        prop_assert!(lz_probability(gap * f, rate, hbar).probability >= p);
        prop_assert!(lz_probability(gap, rate * f, hbar).probability <= p);
        prop_assert!(lz_probability(gap, -rate, hbar).probability == p);
    }

    #[test]
    fn rate_bound_and_transfer_time_agree(gap in 1e-32..1e-29f64, p0 in 0.5..0.9999f64) {
        let hbar = tweezer_core::units::HBAR;
        let rate = ramp_rate_bound(gap, p0, hbar).unwrap();
        let tau = min_transfer_time(gap, p0, hbar).unwrap();
        // Sweeping one gap width at the bound takes the shortest transfer time.
        prop_assert!((tau * rate / (gap / hbar) - 1.0).abs() < 1e-12);
        prop_assert!((lz_probability(gap, rate, hbar).probability - p0).abs() < 1e-9);
    }

    #[test]
    fn pulse_area_is_additive(
        peak in 0.1..1e4f64,
        width in 1e-5..1e-2f64,
        split in 0.05..0.95f64,
    ) {
        let g = Envelope::gaussian(peak, 0.0, width).unwrap();
        let (a, b) = (-5.0 * width, 5.0 * width);
        let m = a + split * (b - a);
        let whole = pulse_area(&g, a, b).unwrap();
        let parts = pulse_area(&g, a, m).unwrap() + pulse_area(&g, m, b).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole);
        prop_assert!((whole / (peak * width * PI.sqrt()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scrap_crossings_are_recovered(
        stark_peak in 5e3..5e4f64,
        stark_width in 2e-4..4e-3f64,
        ratio in 0.2..1.2f64,
    ) {
        let pulses = ScrapPulses {
            pump_peak: 1e4,
            pump_width: stark_width / 2.0,
            stark_peak,
            stark_width,
            half_separation: ratio * stark_width,
            delay: 0.0,
        };
        let model = reference_model();
        let resonance = model.resonance_detunings().zero_one;
        let s = build_scrap_schedule(&pulses, resonance).unwrap();
        let found = s.schedule.crossing_times(resonance);
        prop_assert_eq!(found.len(), 2);
        let window = s.schedule.duration();
        prop_assert!((found[0] - s.first_crossing).abs() < 1e-9 * window);
        prop_assert!((found[1] - s.second_crossing).abs() < 1e-9 * window);
    }

    #[test]
    fn tanh_plateau_is_smooth_and_bounded(
        peak in 1.0..1e5f64,
        plateau in 1e-4..1e-2f64,
        ramp in 1e-5..1e-3f64,
    ) {
        let env = Envelope::tanh_plateau(peak, 0.0, plateau, ramp).unwrap();
        let (a, b) = (-6.0 * ramp, plateau + 6.0 * ramp);
        let n = 4000;
        let h = (b - a) / n as f64;
        let values: Vec<f64> = (0..=n).map(|i| env.evaluate(a + i as f64 * h)).collect();
        prop_assert!(values.iter().all(|&v| (0.0..=peak * (1.0 + 1e-12)).contains(&v)));
        // Increments never exceed the analytic slope bound peak / (2 ramp).
        let bound = peak / (2.0 * ramp) * h * 1.0001;
        prop_assert!(values.windows(2).all(|w| (w[1] - w[0]).abs() <= bound));
        prop_assert!((env.evaluate(plateau / 2.0) / peak - 1.0).abs() < 1e-3 || plateau < 10.0 * ramp);
    }
}

#[test]
fn splitting_is_smallest_at_resonance() {
    let model = reference_model();
    let res = model.resonance_detunings().zero_one;
    let omega_l = 4e3;
    let at = dressed(&model, res, omega_l).splitting;
    assert_relative_eq!(at, dressed(&model, res, omega_l).delta, max_relative = 1e-12);
    for i in -2000..=2000 {
        let det = res + i as f64 * 5.0;
        assert!(dressed(&model, det, omega_l).splitting >= at);
    }
}

#[test]
fn resonant_two_level_rabi_formula() {
    let model = LevelModel::with_n_max(derive_all(&reference_system()).unwrap(), 1).unwrap();
    let omega_l = 4e3;
    let coupling = model.rabi_coupling(0, omega_l).unwrap();
    let res = model.resonance_detunings().zero_one;
    for offset in [0.0, 1.5e3, -4e3] {
        let det = res - offset;
        let duration = 2.5e-3;
        let schedule = PulseSchedule::new(Envelope::constant(det), Envelope::constant(omega_l), 0.0, duration).unwrap();
        let traj = propagate(&model, &schedule, &StateVector::basis(2, 0), &StepControl::default()).unwrap();
        // Level |1> sits at offset above |0>, so the generalized Rabi frequency is hypot(offset, coupling).
        let general = offset.hypot(coupling);
        for (t, state) in traj.times().iter().zip(traj.states()) {
            let expected = (coupling / general).powi(2) * (general * t / 2.0).sin().powi(2);
            assert!((state.populations()[1] - expected).abs() < 1e-7, "t = {t}: {} vs {expected}", state.populations()[1]);
        }
    }
}

fn protocol_schedules() -> Vec<PulseSchedule> {
    let mut out = Vec::new();
    for name in ["fig3a", "fig4", "fig6", "fig7", "fig7_sequential"] {
        let p = preset(name).unwrap();
        let model = p.model().unwrap();
        let protocol = match &p.protocol {
            Protocol::Ramp(r) => {
                let mut r = r.clone();
                r.rate = 5e6;
                Protocol::Ramp(r)
            }
            other => other.clone(),
        };
        out.push(protocol.schedule(&model).unwrap());
    }
    out
}

#[test]
fn protocol_evolution_is_unitary() {
    let model = reference_model();
    for schedule in protocol_schedules() {
        let traj = propagate(&model, &schedule, &StateVector::basis(3, 0), &StepControl::default()).unwrap();
        for state in traj.states() {
            assert!((state.norm_sqr() - 1.0).abs() < 1e-9, "norm {}", state.norm_sqr());
        }
    }
}

#[test]
fn reversed_drive_undoes_the_evolution() {
    let model = reference_model();
    for schedule in protocol_schedules() {
        let start = StateVector::basis(3, 0);
        let forward = final_state(&model, &schedule, &start, None);
        let back = final_state(&model, &TimeReversed(&schedule), &forward.conj(), None);
        assert!(distance(&back, &start.conj()) < 1e-7, "distance {}", distance(&back, &start.conj()));
    }
}

#[test]
fn integrator_is_fourth_order() {
    let model = reference_model();
    let res = model.resonance_detunings().zero_one;
    let schedule = build_ramp_schedule(res - 1e4, res + 1e4, 1e8, 4e3).unwrap();
    let start = StateVector::basis(3, 0);
    let h = 2e-6;
    let reference = final_state(&model, &schedule, &start, Some(h / 32.0));
    let errors: Vec<f64> = [h, h / 2.0, h / 4.0]
        .iter()
        .map(|&step| distance(&final_state(&model, &schedule, &start, Some(step)), &reference))
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 4.0).abs() < 0.5, "observed order {order}, errors {errors:?}");
    }
}

#[test]
fn automatic_step_is_converged() {
    let model = reference_model();
    for schedule in protocol_schedules() {
        let h = StepControl::automatic_step(&model, &schedule);
        let start = StateVector::basis(3, 0);
        let coarse = final_state(&model, &schedule, &start, Some(h)).populations();
        let fine = final_state(&model, &schedule, &start, Some(h / 2.0)).populations();
        for (a, b) in coarse.iter().zip(&fine) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn crossing_search_finds_linear_ramp_root() {
    let ramp = Envelope::LinearRamp { start: -3.0, rate: 2.0 };
    let roots = crossing_times(&ramp, 0.0, 10.0, 1.0);
    assert_eq!(roots.len(), 1);
    assert!((roots[0] - 2.0).abs() < 1e-10);
}
