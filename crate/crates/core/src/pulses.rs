//! Parametric envelopes and complete detuning/drive schedules.
//!
//! Gaussians use the width convention `exp(-(t - c)^2 / T^2)`; there is no
//! factor of two in the exponent, so the area of a Gaussian is `peak * T * sqrt(pi)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::levels::LevelModel;

/// Number of widths kept on either side of the outermost pulse feature.
pub const TAIL_WIDTHS: f64 = 4.0;
/// Tail kept around area-defined pulses; the truncated area is `erfc(5)`, about 1.5e-12.
pub const AREA_TAIL_WIDTHS: f64 = 5.0;
/// Padding of switched ramps in units of the switching time.
pub const SWITCH_PADDING: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Constant {
        value: f64,
    },
    /// `start + rate * t`.
    LinearRamp {
        start: f64,
        rate: f64,
    },
    /// Holds `from` before `t_start` and `to` after `t_end`, linear in between.
    ClampedRamp {
        from: f64,
        to: f64,
        t_start: f64,
        t_end: f64,
    },
    /// `peak * exp(-(t - center)^2 / width^2)`.
    Gaussian {
        peak: f64,
        center: f64,
        width: f64,
    },
    /// `peak / 2 * (tanh((t - start) / ramp) - tanh((t - start - plateau) / ramp))`.
    TanhPlateau {
        peak: f64,
        start: f64,
        plateau_width: f64,
        ramp_time: f64,
    },
    OffsetSum {
        offset: f64,
        inner: Box<Envelope>,
    },
    Sum {
        terms: Vec<Envelope>,
    },
}

impl Envelope {
    pub fn constant(value: f64) -> Self {
        Envelope::Constant { value }
    }

    pub fn gaussian(peak: f64, center: f64, width: f64) -> Result<Self> {
        let env = Envelope::Gaussian { peak, center, width };
        env.validate()?;
        Ok(env)
    }

    pub fn tanh_plateau(peak: f64, start: f64, plateau_width: f64, ramp_time: f64) -> Result<Self> {
        let env = Envelope::TanhPlateau {
            peak,
            start,
            plateau_width,
            ramp_time,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn offset(self, offset: f64) -> Self {
        Envelope::OffsetSum {
            offset,
            inner: Box::new(self),
        }
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant { value } => *value,
            Envelope::LinearRamp { start, rate } => start + rate * t,
            Envelope::ClampedRamp {
                from,
                to,
                t_start,
                t_end,
            } => {
                if t <= *t_start {
                    *from
                } else if t >= *t_end {
                    *to
                } else {
                    from + (to - from) * (t - t_start) / (t_end - t_start)
                }
            }
            Envelope::Gaussian {
                peak,
                center,
                width,
            } => {
                let x = (t - center) / width;
                peak * (-x * x).exp()
            }
            Envelope::TanhPlateau {
                peak,
                start,
                plateau_width,
                ramp_time,
            } => {
                let rise = ((t - start) / ramp_time).tanh();
                let fall = ((t - start - plateau_width) / ramp_time).tanh();
                0.5 * peak * (rise - fall)
            }
            Envelope::OffsetSum { offset, inner } => offset + inner.evaluate(t),
            Envelope::Sum { terms } => terms.iter().map(|e| e.evaluate(t)).sum(),
        }
    }

    /// Checks that every parameter is finite and every width positive.
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, values: &[f64]| {
            if values.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidSchedule(format!("{name} has non-finite parameters")))
            }
        };
        match self {
            Envelope::Constant { value } => finite("constant", &[*value]),
            Envelope::LinearRamp { start, rate } => finite("linear ramp", &[*start, *rate]),
            Envelope::ClampedRamp {
                from,
                to,
                t_start,
                t_end,
            } => {
                finite("clamped ramp", &[*from, *to, *t_start, *t_end])?;
                if t_end > t_start {
                    Ok(())
                } else {
                    Err(Error::InvalidSchedule("clamped ramp must end after it starts".into()))
                }
            }
            Envelope::Gaussian {
                peak,
                center,
                width,
            } => {
                finite("gaussian", &[*peak, *center])?;
                ensure_positive("gaussian width", *width).map(|_| ())
            }
            Envelope::TanhPlateau {
                peak,
                start,
                plateau_width,
                ramp_time,
            } => {
                finite("tanh plateau", &[*peak, *start])?;
                ensure_positive("plateau width", *plateau_width)?;
                ensure_positive("ramp time", *ramp_time).map(|_| ())
            }
            Envelope::OffsetSum { offset, inner } => {
                finite("offset", &[*offset])?;
                inner.validate()
            }
            Envelope::Sum { terms } => terms.iter().try_for_each(Envelope::validate),
        }
    }
}

/// Detuning and drive over a finite window, both in rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct PulseSchedule {
    detuning: Envelope,
    rabi: Envelope,
    t_start: f64,
    t_end: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    detuning: Envelope,
    rabi: Envelope,
    window: [f64; 2],
}

impl TryFrom<ScheduleRepr> for PulseSchedule {
    type Error = Error;
    fn try_from(r: ScheduleRepr) -> Result<Self> {
        PulseSchedule::new(r.detuning, r.rabi, r.window[0], r.window[1])
    }
}

impl From<PulseSchedule> for ScheduleRepr {
    fn from(s: PulseSchedule) -> Self {
        ScheduleRepr {
            detuning: s.detuning,
            rabi: s.rabi,
            window: [s.t_start, s.t_end],
        }
    }
}

impl PulseSchedule {
    pub fn new(detuning: Envelope, rabi: Envelope, t_start: f64, t_end: f64) -> Result<Self> {
        detuning.validate()?;
        rabi.validate()?;
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::InvalidSchedule(format!(
                "window [{t_start}, {t_end}] must be finite and increasing"
            )));
        }
        const PROBES: usize = 256;
        for i in 0..=PROBES {
            let t = t_start + (t_end - t_start) * i as f64 / PROBES as f64;
            if !(detuning.evaluate(t).is_finite() && rabi.evaluate(t).is_finite()) {
                return Err(Error::NonFinite(format!("schedule value at t = {t:e}")));
            }
        }
        Ok(PulseSchedule {
            detuning,
            rabi,
            t_start,
            t_end,
        })
    }

    pub fn detuning(&self) -> &Envelope {
        &self.detuning
    }

    pub fn rabi(&self) -> &Envelope {
        &self.rabi
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Times at which the detuning crosses `level` (rad/s), ascending.
    pub fn crossing_times(&self, level: f64) -> Vec<f64> {
        crossing_times(&self.detuning, self.t_start, self.t_end, level)
    }
}

/// Integral of the envelope over `[t_start, t_end]` to relative accuracy 1e-10.
pub fn pulse_area(envelope: &Envelope, t_start: f64, t_end: f64) -> Result<f64> {
    const PANELS: usize = 64;
    const REL_TOL: f64 = 1e-11;
    if t_end == t_start {
        return Ok(0.0);
    }
    let f = |t: f64| -> Result<f64> {
        let v = envelope.evaluate(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("envelope value at t = {t:e}")))
        }
    };
    let h = (t_end - t_start) / PANELS as f64;
    let mut panels = Vec::with_capacity(PANELS);
    let mut scale = 0.0;
    for i in 0..PANELS {
        let a = t_start + h * i as f64;
        let b = if i + 1 == PANELS { t_end } else { a + h };
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
        scale += (b - a) / 6.0 * (fa.abs() + 4.0 * fm.abs() + fb.abs());
        panels.push((a, b, fa, fm, fb));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let tol = REL_TOL * scale / PANELS as f64;
    let mut total = 0.0;
    for (a, b, fa, fm, fb) in panels {
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += adaptive_simpson(&f, a, b, fa, fm, fb, whole, tol, 48)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// Roots of `envelope(t) - level` on `[t_start, t_end]`, ascending.
///
/// A uniform sign scan brackets each root, which is then bisected to
/// `1e-12` of the window length. Tangential touches are not reported.
pub fn crossing_times(envelope: &Envelope, t_start: f64, t_end: f64, level: f64) -> Vec<f64> {
    const SCAN: usize = 4096;
    let f = |t: f64| envelope.evaluate(t) - level;
    let span = t_end - t_start;
    let tol = 1e-12 * span;
    let mut roots = Vec::new();
    let mut prev_t = t_start;
    let mut prev_f = f(t_start);
    if prev_f == 0.0 {
        roots.push(t_start);
    }
    for i in 1..=SCAN {
        let t = if i == SCAN {
            t_end
        } else {
            t_start + span * i as f64 / SCAN as f64
        };
        let ft = f(t);
        if ft == 0.0 {
            roots.push(t);
        } else if prev_f != 0.0 && (prev_f < 0.0) != (ft < 0.0) {
            let (mut lo, mut hi, mut flo) = (prev_t, t, prev_f);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_f = ft;
    }
    roots
}

fn check_ramp(from: f64, to: f64, rate: f64) -> Result<f64> {
    if !(from.is_finite() && to.is_finite() && rate.is_finite()) {
        return Err(Error::InvalidSchedule("ramp parameters must be finite".into()));
    }
    if rate == 0.0 {
        return Err(Error::InvalidSchedule("ramp rate must be non-zero".into()));
    }
    if from == to {
        return Err(Error::InvalidSchedule("zero-length ramp".into()));
    }
    let duration = (to - from) / rate;
    if duration <= 0.0 {
        return Err(Error::InvalidSchedule(
            "ramp rate sign disagrees with the detuning change".into(),
        ));
    }
    Ok(duration)
}

/// Linear detuning sweep from `from` to `to` under a constant drive, over `[0, T]`.
pub fn build_ramp_schedule(from: f64, to: f64, rate: f64, omega_l: f64) -> Result<PulseSchedule> {
    let duration = check_ramp(from, to, rate)?;
    PulseSchedule::new(
        Envelope::LinearRamp { start: from, rate },
        Envelope::constant(omega_l),
        0.0,
        duration,
    )
}

/// Linear sweep over `[0, T]` with the detuning held outside it, and a drive that
/// switches on before the sweep and off after it with tanh edges of `switch_time`.
pub fn build_switched_ramp_schedule(
    from: f64,
    to: f64,
    rate: f64,
    omega_l: f64,
    switch_time: f64,
) -> Result<PulseSchedule> {
    let duration = check_ramp(from, to, rate)?;
    ensure_positive("switch time", switch_time)?;
    let rabi = Envelope::tanh_plateau(
        omega_l,
        -2.0 * switch_time,
        duration + 4.0 * switch_time,
        switch_time,
    )?;
    let detuning = Envelope::ClampedRamp {
        from,
        to,
        t_start: 0.0,
        t_end: duration,
    };
    let pad = SWITCH_PADDING * switch_time;
    PulseSchedule::new(detuning, rabi, -pad, duration + pad)
}

/// Gaussian pump and Gaussian Stark pulse for one-atom transfer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScrapPulses {
    /// Peak drive (rad/s).
    pub pump_peak: f64,
    /// Pump width (s).
    pub pump_width: f64,
    /// Peak Stark shift of the detuning (rad/s).
    pub stark_peak: f64,
    /// Stark pulse width (s).
    pub stark_width: f64,
    /// Distance from each resonance crossing to the Stark pulse centre (s).
    pub half_separation: f64,
    /// Pump delay; positive values move the pump before the first crossing (s).
    pub delay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScrapSchedule {
    pub schedule: PulseSchedule,
    /// Constant part of the detuning (rad/s).
    pub detuning_offset: f64,
    pub first_crossing: f64,
    pub second_crossing: f64,
    pub pump_center: f64,
}

fn stark_detuning(
    stark_peak: f64,
    stark_width: f64,
    half_separation: f64,
    resonance: f64,
) -> Result<(Envelope, f64)> {
    ensure_positive("crossing half-separation", half_separation)?;
    ensure_positive("Stark pulse width", stark_width)?;
    if stark_peak == 0.0 || !stark_peak.is_finite() {
        return Err(Error::InfeasibleSchedule(
            "the Stark pulse must have a non-zero finite peak".into(),
        ));
    }
    let x = half_separation / stark_width;
    let factor = (-x * x).exp();
    if factor == 0.0 || (stark_peak * factor).abs() < f64::MIN_POSITIVE {
        return Err(Error::InfeasibleSchedule(format!(
            "the Stark pulse is negligible at the crossings (separation/width = {x:.3})"
        )));
    }
    let offset = resonance - stark_peak * factor;
    let envelope = Envelope::gaussian(stark_peak, half_separation, stark_width)?.offset(offset);
    Ok((envelope, offset))
}

/// One-atom SCRAP: the Stark-shifted detuning crosses `resonance` at `0` and at
/// `2 * half_separation`; the pump is centred at `-delay`.
pub fn build_scrap_schedule(pulses: &ScrapPulses, resonance: f64) -> Result<ScrapSchedule> {
    let p = pulses;
    ensure_positive("pump width", p.pump_width)?;
    let (detuning, offset) =
        stark_detuning(p.stark_peak, p.stark_width, p.half_separation, resonance)?;
    let pump_center = -p.delay;
    let rabi = Envelope::gaussian(p.pump_peak, pump_center, p.pump_width)?;
    let pump_tail = TAIL_WIDTHS * p.pump_width;
    let stark_tail = TAIL_WIDTHS * p.stark_width;
    let second = 2.0 * p.half_separation;
    let t_start = (pump_center - pump_tail)
        .min(p.half_separation - stark_tail)
        .min(-pump_tail);
    let t_end = (pump_center + pump_tail)
        .max(p.half_separation + stark_tail)
        .max(second + pump_tail);
    Ok(ScrapSchedule {
        schedule: PulseSchedule::new(detuning, rabi, t_start, t_end)?,
        detuning_offset: offset,
        first_crossing: 0.0,
        second_crossing: second,
        pump_center,
    })
}

/// Stark pulse plus a tanh-edged pump for consecutive `0 -> 1 -> 2` transfer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialScrapPulses {
    /// Plateau drive (rad/s).
    pub pump_peak: f64,
    /// Nominal pump duration (s).
    pub pump_width: f64,
    /// Pump switching time (s).
    pub ramp_time: f64,
    pub stark_peak: f64,
    pub stark_width: f64,
    pub half_separation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequentialScrapSchedule {
    pub schedule: PulseSchedule,
    pub detuning_offset: f64,
    /// Crossings of the one-atom resonance.
    pub first_transition_crossings: Vec<f64>,
    /// Crossings of the second-atom resonance.
    pub second_transition_crossings: Vec<f64>,
}

/// Two-atom SCRAP; the pump plateau spans `[-2 t_r, T + 2 t_r]` and covers the
/// early crossings of both resonances.
pub fn build_sequential_scrap_schedule(
    pulses: &SequentialScrapPulses,
    first_resonance: f64,
    second_resonance: f64,
) -> Result<SequentialScrapSchedule> {
    let p = pulses;
    ensure_positive("pump width", p.pump_width)?;
    ensure_positive("pump ramp time", p.ramp_time)?;
    let (detuning, offset) =
        stark_detuning(p.stark_peak, p.stark_width, p.half_separation, first_resonance)?;
    let reach = offset + p.stark_peak;
    let needed = second_resonance;
    let reaches = if p.stark_peak > 0.0 { reach > needed } else { reach < needed };
    if !reaches {
        return Err(Error::InfeasibleSchedule(format!(
            "the Stark pulse peaks at {reach:.1} rad/s and never reaches the second resonance {needed:.1} rad/s"
        )));
    }
    let rabi = Envelope::tanh_plateau(
        p.pump_peak,
        -2.0 * p.ramp_time,
        p.pump_width + 4.0 * p.ramp_time,
        p.ramp_time,
    )?;
    let pad = 2.0 * p.ramp_time + SWITCH_PADDING * p.ramp_time;
    let stark_tail = TAIL_WIDTHS * p.stark_width;
    let t_start = (-pad).min(p.half_separation - stark_tail);
    let t_end = (p.pump_width + pad).max(p.half_separation + stark_tail);
    let schedule = PulseSchedule::new(detuning, rabi, t_start, t_end)?;
    Ok(SequentialScrapSchedule {
        first_transition_crossings: schedule.crossing_times(first_resonance),
        second_transition_crossings: schedule.crossing_times(second_resonance),
        detuning_offset: offset,
        schedule,
    })
}

/// A single-step transition of the ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    ZeroOne,
    OneTwo,
}

impl Transition {
    /// Index of the lower level.
    pub fn lower(self) -> usize {
        match self {
            Transition::ZeroOne => 0,
            Transition::OneTwo => 1,
        }
    }

    /// Resonant detuning of this transition (rad/s).
    pub fn resonance(self, model: &LevelModel) -> f64 {
        let r = model.resonance_detunings();
        match self {
            Transition::ZeroOne => r.zero_one,
            Transition::OneTwo => r.one_two,
        }
    }
}

/// Peak drive giving an effective Gaussian area of `area` on the transition.
pub fn gaussian_peak_for_area(
    model: &LevelModel,
    transition: Transition,
    width: f64,
    area: f64,
) -> Result<f64> {
    ensure_positive("pulse width", width)?;
    let unit = model.rabi_unit(transition.lower())?;
    if unit == 0.0 {
        return Err(Error::Singular("transition has zero coupling"));
    }
    Ok(area / (width * PI.sqrt() * unit))
}

/// Resonant Gaussian pulse of effective area `pi`, centred at zero.
pub fn build_pi_pulse(model: &LevelModel, transition: Transition, width: f64) -> Result<PulseSchedule> {
    let peak = gaussian_peak_for_area(model, transition, width, PI)?;
    build_resonant_gaussian(model, transition, peak, width)
}

/// Resonant Gaussian pulse of arbitrary peak drive, centred at zero.
pub fn build_resonant_gaussian(
    model: &LevelModel,
    transition: Transition,
    peak: f64,
    width: f64,
) -> Result<PulseSchedule> {
    ensure_positive("pulse width", width)?;
    let tail = AREA_TAIL_WIDTHS * width;
    PulseSchedule::new(
        Envelope::constant(transition.resonance(model)),
        Envelope::gaussian(peak, 0.0, width)?,
        -tail,
        tail,
    )
}

/// Two consecutive pi pulses, `0 -> 1` at zero and `1 -> 2` at `separation`.
///
/// The detuning moves linearly between the two resonances over one pulse width
/// centred between the pulses. With `second = false` the second pulse is omitted.
pub fn build_sequential_pi(
    model: &LevelModel,
    width: f64,
    separation: f64,
    second: bool,
) -> Result<PulseSchedule> {
    ensure_positive("pulse separation", separation)?;
    let first_peak = gaussian_peak_for_area(model, Transition::ZeroOne, width, PI)?;
    let second_peak = gaussian_peak_for_area(model, Transition::OneTwo, width, PI)?;
    let mut terms = vec![Envelope::gaussian(first_peak, 0.0, width)?];
    if second {
        terms.push(Envelope::gaussian(second_peak, separation, width)?);
    }
    let mid = 0.5 * separation;
    let detuning = Envelope::ClampedRamp {
        from: Transition::ZeroOne.resonance(model),
        to: Transition::OneTwo.resonance(model),
        t_start: mid - 0.5 * width,
        t_end: mid + 0.5 * width,
    };
    let tail = AREA_TAIL_WIDTHS * width;
    PulseSchedule::new(detuning, Envelope::Sum { terms }, -tail, separation + tail)
}
