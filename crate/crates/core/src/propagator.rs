//! Fixed-step fourth-order Runge-Kutta integration of the ladder dynamics.
//!
//! The generator `H / hbar` is real and tridiagonal, so each derivative costs
//! `O(n_max)` work and no matrices are formed.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levels::LevelModel;
use crate::pulses::PulseSchedule;

/// Steps per window in the automatic step rule.
pub const MIN_STEPS_PER_WINDOW: f64 = 1000.0;
/// Steps per period of the fastest frequency scale in the automatic step rule.
pub const STEPS_PER_PERIOD: f64 = 50.0;
/// Norm drift the automatic step is refined to stay below.
///
/// Fourth-order Runge-Kutta damps a level rotating at `w` by about
/// `(h w)^6 / 72` per step, so the drift over a window scales as `h^5`. When
/// an automatic-step run exceeds this target the step is halved and the run
/// repeated, at most [`MAX_REFINEMENTS`] times.
pub const NORM_TARGET: f64 = 5e-10;
/// Step halvings allowed while chasing [`NORM_TARGET`].
pub const MAX_REFINEMENTS: u32 = 4;
/// Largest norm drift tolerated before propagation is declared failed.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Hard cap on the number of steps of a single propagation.
pub const MAX_STEPS: usize = 500_000_000;
/// Default cap on stored samples.
pub const DEFAULT_MAX_SAMPLES: usize = 10_000;

/// Time-dependent detuning and drive over a finite window.
pub trait Drive {
    fn window(&self) -> (f64, f64);
    fn detuning(&self, t: f64) -> f64;
    fn rabi(&self, t: f64) -> f64;
}

impl Drive for PulseSchedule {
    fn window(&self) -> (f64, f64) {
        (self.t_start(), self.t_end())
    }
    fn detuning(&self, t: f64) -> f64 {
        PulseSchedule::detuning(self).evaluate(t)
    }
    fn rabi(&self, t: f64) -> f64 {
        PulseSchedule::rabi(self).evaluate(t)
    }
}

/// The drive played backwards over the same window.
pub struct TimeReversed<'a, D: ?Sized>(pub &'a D);

impl<D: Drive + ?Sized> Drive for TimeReversed<'_, D> {
    fn window(&self) -> (f64, f64) {
        self.0.window()
    }
    fn detuning(&self, t: f64) -> f64 {
        let (a, b) = self.0.window();
        self.0.detuning(a + b - t)
    }
    fn rabi(&self, t: f64) -> f64 {
        let (a, b) = self.0.window();
        self.0.rabi(a + b - t)
    }
}

/// Complex amplitudes of `|0>, ..., |n_max>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<Complex64>);

impl StateVector {
    /// All population in `|n>`.
    pub fn basis(dim: usize, n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[n] = Complex64::new(1.0, 0.0);
        StateVector(amps)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        StateVector(amps)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn conj(&self) -> Self {
        StateVector(self.0.iter().map(|c| c.conj()).collect())
    }

    /// Global phase rotation making the `|0>` amplitude real and non-negative.
    pub fn gauge_fixed(&self) -> Self {
        let c0 = self.0[0];
        if c0.norm() == 0.0 {
            return self.clone();
        }
        let phase = c0.conj() / c0.norm();
        StateVector(self.0.iter().map(|c| c * phase).collect())
    }
}

/// Step selection and sample decimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Fixed step (s); `None` selects the automatic rule, halved as needed to
    /// keep the norm drift below [`NORM_TARGET`].
    pub step: Option<f64>,
    /// Upper bound on stored samples, including both endpoints.
    pub max_samples: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            step: None,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }
}

impl StepControl {
    /// Stores only the initial and final states.
    pub fn endpoints() -> Self {
        StepControl {
            step: None,
            max_samples: 2,
        }
    }

    pub fn with_step(step: f64) -> Self {
        StepControl {
            step: Some(step),
            ..Self::default()
        }
    }

    /// Automatic step: the smaller of `window / 1000` and `2 pi / (50 w)`, where
    /// `w` is the largest of the detuning, the collective couplings and the
    /// bare level frequencies sampled over the window.
    pub fn automatic_step<D: Drive + ?Sized>(model: &LevelModel, drive: &D) -> f64 {
        const PROBES: usize = 2000;
        let (a, b) = drive.window();
        let span = b - a;
        let hbar = model.hbar();
        let top_coupling = model.rabi_unit(model.n_max() - 1).unwrap_or(0.0);
        let level_scale = (0..=model.n_max())
            .map(|n| model.bare_energy(n).unwrap_or(0.0).abs() / hbar)
            .fold(0.0, f64::max);
        let mut omega_max = level_scale;
        for i in 0..=PROBES {
            let t = a + span * i as f64 / PROBES as f64;
            omega_max = omega_max
                .max(drive.detuning(t).abs())
                .max((top_coupling * drive.rabi(t)).abs());
        }
        let mut h = span / MIN_STEPS_PER_WINDOW;
        if omega_max > 0.0 {
            h = h.min(2.0 * PI / (STEPS_PER_PERIOD * omega_max));
        }
        h
    }
}

/// Decimated time series of states.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
    step: f64,
    steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn populations(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(StateVector::populations).collect()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("a trajectory holds at least one state")
    }

    /// Step size actually used (s).
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Writes `time_s, p0.., re_c0, im_c0, ..` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let dim = self.states.first().map_or(0, StateVector::dim);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time_s".to_string()];
        header.extend((0..dim).map(|n| format!("p{n}")));
        for n in 0..dim {
            header.push(format!("re_c{n}"));
            header.push(format!("im_c{n}"));
        }
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(s.populations().iter().map(f64::to_string));
            for c in s.amplitudes() {
                row.push(c.re.to_string());
                row.push(c.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates `i dpsi/dt = (H / hbar) psi` across the drive window.
pub fn propagate<D: Drive + ?Sized>(
    model: &LevelModel,
    drive: &D,
    initial: &StateVector,
    control: &StepControl,
) -> Result<Trajectory> {
    let dim = model.dim();
    if initial.dim() != dim {
        return Err(Error::InvalidSchedule(format!(
            "initial state has {} amplitudes, the model {dim}",
            initial.dim()
        )));
    }
    let norm0 = initial.norm_sqr();
    if (norm0 - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidSchedule(format!("initial state norm {norm0} is not 1")));
    }
    let (t0, t1) = drive.window();
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::InvalidSchedule(format!("window [{t0}, {t1}] is not finite")));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Trajectory {
            times: vec![t0],
            states: vec![initial.clone()],
            step: 0.0,
            steps: 0,
        });
    }
    let h_target = match control.step {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => {
            return Err(Error::NonPositive {
                quantity: "step",
                value: h,
            })
        }
        None => StepControl::automatic_step(model, drive),
    };
    let refinements = if control.step.is_some() { 0 } else { MAX_REFINEMENTS };
    let mut h_try = h_target;
    for attempt in 0..=refinements {
        let run = integrate(model, drive, initial, control, h_try)?;
        if run.drift <= NORM_TARGET || attempt == refinements {
            return Ok(run.trajectory);
        }
        h_try *= 0.5;
    }
    unreachable!("the last attempt always returns")
}

struct Run {
    trajectory: Trajectory,
    /// Largest norm deviation over every step.
    drift: f64,
}

fn integrate<D: Drive + ?Sized>(
    model: &LevelModel,
    drive: &D,
    initial: &StateVector,
    control: &StepControl,
    h_target: f64,
) -> Result<Run> {
    let (t0, t1) = drive.window();
    let span = t1 - t0;
    let norm0 = initial.norm_sqr();
    let steps_f = (span / h_target).ceil();
    if steps_f.is_nan() || steps_f > MAX_STEPS as f64 {
        return Err(Error::Integration {
            time: t0,
            steps: 0,
            norm: norm0,
            reason: format!("{steps_f:e} steps exceed the cap of {MAX_STEPS}"),
        });
    }
    let steps = (steps_f as usize).max(1);
    let h = span / steps as f64;
    let max_samples = control.max_samples.max(2);
    let stride = steps.div_ceil(max_samples - 1).max(1);

    let mut rk = Rk4::new(model, model.dim());
    let mut psi: Vec<Complex64> = initial.amplitudes().to_vec();
    let mut times = vec![t0];
    let mut states = vec![initial.clone()];
    let mut drift: f64 = (norm0 - 1.0).abs();
    let mut t = t0;
    rk.load(drive, t, 0);
    for i in 1..=steps {
        let t_next = if i == steps { t1 } else { t0 + h * i as f64 };
        rk.step(drive, &mut psi, t, t_next);
        t = t_next;
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        drift = drift.max((norm - 1.0).abs());
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Integration {
                time: t,
                steps: i,
                norm,
                reason: format!("norm drifted to {norm}; reduce the step below {h:e} s"),
            });
        }
        if i % stride == 0 || i == steps {
            times.push(t);
            states.push(StateVector(psi.clone()));
        }
    }
    Ok(Run {
        trajectory: Trajectory {
            times,
            states,
            step: h,
            steps,
        },
        drift,
    })
}

/// Generator cache for three time points per step; the end of one step is
/// the start of the next, so two new generators are built per step.
struct Rk4<'m> {
    model: &'m LevelModel,
    diag: [Vec<f64>; 3],
    off: [Vec<f64>; 3],
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl<'m> Rk4<'m> {
    fn new(model: &'m LevelModel, dim: usize) -> Self {
        let zeros = || vec![0.0; dim];
        let czeros = || vec![Complex64::new(0.0, 0.0); dim];
        Rk4 {
            model,
            diag: [zeros(), zeros(), zeros()],
            off: [vec![0.0; dim - 1], vec![0.0; dim - 1], vec![0.0; dim - 1]],
            k: [czeros(), czeros(), czeros(), czeros()],
            tmp: czeros(),
        }
    }

    fn load<D: Drive + ?Sized>(&mut self, drive: &D, t: f64, slot: usize) {
        self.model.generator(
            drive.detuning(t),
            drive.rabi(t),
            &mut self.diag[slot],
            &mut self.off[slot],
        );
    }

    /// `out = -i G psi` for the generator stored in `slot`.
    fn derivative(diag: &[f64], off: &[f64], psi: &[Complex64], out: &mut [Complex64]) {
        let dim = psi.len();
        for n in 0..dim {
            let mut acc = psi[n] * diag[n];
            if n > 0 {
                acc += psi[n - 1] * off[n - 1];
            }
            if n + 1 < dim {
                acc += psi[n + 1] * off[n];
            }
            out[n] = Complex64::new(acc.im, -acc.re);
        }
    }

    fn step<D: Drive + ?Sized>(&mut self, drive: &D, psi: &mut [Complex64], t: f64, t_next: f64) {
        let h = t_next - t;
        self.load(drive, t + 0.5 * h, 1);
        self.load(drive, t_next, 2);
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        Self::derivative(&self.diag[0], &self.off[0], psi, k1);
        for n in 0..psi.len() {
            tmp[n] = psi[n] + k1[n] * (0.5 * h);
        }
        Self::derivative(&self.diag[1], &self.off[1], tmp, k2);
        for n in 0..psi.len() {
            tmp[n] = psi[n] + k2[n] * (0.5 * h);
        }
        Self::derivative(&self.diag[1], &self.off[1], tmp, k3);
        for n in 0..psi.len() {
            tmp[n] = psi[n] + k3[n] * h;
        }
        Self::derivative(&self.diag[2], &self.off[2], tmp, k4);
        for n in 0..psi.len() {
            psi[n] += (k1[n] + (k2[n] + k3[n]) * 2.0 + k4[n]) * (h / 6.0);
        }
        self.diag.swap(0, 2);
        self.off.swap(0, 2);
    }
}

/// Final population of `|n>`.
pub fn transfer_probability(trajectory: &Trajectory, n: usize) -> Result<f64> {
    let state = trajectory.final_state();
    if n >= state.dim() {
        return Err(Error::LevelOutOfRange {
            index: n,
            max: state.dim() - 1,
        });
    }
    Ok(state.amplitudes()[n].norm_sqr().clamp(0.0, 1.0))
}

/// Applies [`StateVector::gauge_fixed`] to every stored state.
pub fn phase_convention(trajectory: &Trajectory) -> Trajectory {
    Trajectory {
        states: trajectory.states.iter().map(StateVector::gauge_fixed).collect(),
        ..trajectory.clone()
    }
}

/// Propagates from `|0>` and returns the final populations.
pub fn final_populations(model: &LevelModel, schedule: &PulseSchedule) -> Result<Vec<f64>> {
    let initial = StateVector::basis(model.dim(), 0);
    let traj = propagate(model, schedule, &initial, &StepControl::endpoints())?;
    Ok(traj.final_state().populations())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{Envelope, PulseSchedule};
    use crate::units::{derive_all, PhysicalSystem};
    use approx::assert_relative_eq;

    fn model() -> LevelModel {
        let sys = PhysicalSystem::rb87(2.0 * PI * 30e3, 2.0 * PI * 100.0, 1e3, 3e19);
        LevelModel::new(derive_all(&sys).unwrap())
    }

    #[test]
    fn zero_drive_keeps_populations() {
        let m = model();
        let s = PulseSchedule::new(
            Envelope::LinearRamp { start: 2.7e5, rate: 1e7 },
            Envelope::constant(0.0),
            0.0,
            2e-3,
        )
        .unwrap();
        let amps = vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
        ];
        let traj = propagate(&m, &s, &StateVector::from_amplitudes(amps), &StepControl::default()).unwrap();
        for pops in traj.populations() {
            assert!((pops[0] - 0.36).abs() < 1e-12);
            assert!((pops[1] - 0.64).abs() < 1e-12);
        }
    }

    #[test]
    fn resonant_rabi_inversion() {
        let m = model();
        let omega_l = 4e3;
        let coupling = m.rabi_coupling(0, omega_l).unwrap();
        // A far-detuned third level would perturb the two-level formula, so
        // use a ladder truncated at one atom.
        let m1 = LevelModel::with_n_max(m.derived().clone(), 1).unwrap();
        let t_pi = PI / coupling;
        let s = PulseSchedule::new(
            Envelope::constant(m.resonance_detunings().zero_one),
            Envelope::constant(omega_l),
            0.0,
            t_pi,
        )
        .unwrap();
        let traj = propagate(&m1, &s, &StateVector::basis(2, 0), &StepControl::default()).unwrap();
        for (t, p) in traj.times().iter().zip(traj.populations()) {
            let expected = (0.5 * coupling * t).sin().powi(2);
            assert!((p[1] - expected).abs() < 1e-9, "t = {t}");
        }
        assert!((transfer_probability(&traj, 1).unwrap() - 1.0).abs() < 1e-9);
    }

    struct Empty;
    impl Drive for Empty {
        fn window(&self) -> (f64, f64) {
            (1.0, 1.0)
        }
        fn detuning(&self, _: f64) -> f64 {
            0.0
        }
        fn rabi(&self, _: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn empty_window_returns_initial_state() {
        let m = model();
        let traj = propagate(&m, &Empty, &StateVector::basis(3, 0), &StepControl::default()).unwrap();
        assert_eq!(transfer_probability(&traj, 0).unwrap(), 1.0);
        assert!(transfer_probability(&traj, 3).is_err());
    }

    #[test]
    fn rejects_bad_initial_state() {
        let m = model();
        let s = PulseSchedule::new(Envelope::constant(0.0), Envelope::constant(0.0), 0.0, 1e-3).unwrap();
        let bad = StateVector::from_amplitudes(vec![Complex64::new(0.5, 0.0); 3]);
        assert!(propagate(&m, &s, &bad, &StepControl::default()).is_err());
        assert!(propagate(&m, &s, &StateVector::basis(2, 0), &StepControl::default()).is_err());
    }

    #[test]
    fn coarse_step_reports_integration_failure() {
        let m = model();
        let s = PulseSchedule::new(Envelope::constant(0.0), Envelope::constant(4e3), 0.0, 1e-3).unwrap();
        let err = propagate(&m, &s, &StateVector::basis(3, 0), &StepControl::with_step(1e-4));
        assert!(matches!(err, Err(Error::Integration { .. })));
    }

    #[test]
    fn decimation_caps_samples() {
        let m = model();
        let s = crate::pulses::build_pi_pulse(&m, crate::pulses::Transition::ZeroOne, 1e-3).unwrap();
        let control = StepControl { step: None, max_samples: 11 };
        let traj = propagate(&m, &s, &StateVector::basis(3, 0), &control).unwrap();
        assert!(traj.times().len() <= 11);
        assert_eq!(*traj.times().last().unwrap(), s.t_end());
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn phase_convention_is_idempotent() {
        let m = model();
        let s = crate::pulses::build_pi_pulse(&m, crate::pulses::Transition::ZeroOne, 1e-3).unwrap();
        let traj = propagate(&m, &s, &StateVector::basis(3, 0), &StepControl::default()).unwrap();
        let once = phase_convention(&traj);
        let twice = phase_convention(&once);
        for (a, b) in once.states().iter().zip(twice.states()) {
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-15);
            }
            assert!(a.amplitudes()[0].re >= 0.0);
            assert!(a.amplitudes()[0].im.abs() < 1e-15);
        }
        for (p, q) in traj.populations().iter().zip(once.populations()) {
            for (x, y) in p.iter().zip(q) {
                assert_relative_eq!(*x, y, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = model();
        let s = crate::pulses::build_pi_pulse(&m, crate::pulses::Transition::ZeroOne, 1e-3).unwrap();
        let control = StepControl { step: None, max_samples: 5 };
        let traj = propagate(&m, &s, &StateVector::basis(3, 0), &control).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_s,p0,p1,p2,re_c0,im_c0,re_c1,im_c1,re_c2,im_c2"
        );
        assert_eq!(lines.count(), traj.times().len());
    }
}
