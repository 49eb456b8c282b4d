//! Parameter sweeps over the transfer protocols and a pulse optimizer.
//!
//! Grid points are independent and evaluated in parallel; results are always
//! gathered in row-major grid order (first axis outermost), so output does not
//! depend on scheduling.

mod contour;
mod optimize;
mod protocol;

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levels::LevelModel;
use crate::propagator::final_populations;

pub use contour::{contour_segments, Segment};
pub use optimize::{
    nelder_mead, optimize_pulse, Bound, OptimizeOptions, OptimizeResult, SearchResult,
};
pub use protocol::{
    PiProtocol, Protocol, RampProtocol, ScrapProtocol, SequentialPiProtocol,
    SequentialScrapProtocol,
};

/// Probability above which a grid point belongs to the high-efficiency region.
pub const HIGH_EFFICIENCY: f64 = 0.99;
/// Probability below which a grid point counts as failed transfer.
pub const LOW_EFFICIENCY: f64 = 0.80;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

/// One swept parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub scale: Scale,
}

fn linear() -> Scale {
    Scale::Linear
}

impl Axis {
    pub fn linear(name: &str, min: f64, max: f64, points: usize) -> Self {
        Axis {
            name: name.to_string(),
            min,
            max,
            points,
            scale: Scale::Linear,
        }
    }

    pub fn log(name: &str, min: f64, max: f64, points: usize) -> Self {
        Axis {
            scale: Scale::Log,
            ..Axis::linear(name, min, max, points)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidSweep(format!("axis `{}` needs at least 2 points", self.name)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::InvalidSweep(format!("axis `{}` needs finite max > min", self.name)));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::InvalidSweep(format!("log axis `{}` needs min > 0", self.name)));
        }
        Ok(())
    }

    /// Grid values; the endpoints are exactly `min` and `max`.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let last = self.points - 1;
        Ok((0..self.points)
            .map(|i| {
                if i == last {
                    return self.max;
                }
                let f = i as f64 / last as f64;
                match self.scale {
                    Scale::Linear => self.min + (self.max - self.min) * f,
                    Scale::Log => self.min * (self.max / self.min).powf(f),
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Protocol with its fixed parameters.
    pub protocol: Protocol,
    pub axes: Vec<Axis>,
}

/// Outcome of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointResult {
    pub coords: Vec<f64>,
    /// Final target population; `None` if the point failed.
    pub probability: Option<f64>,
    pub populations: Vec<f64>,
    pub lz: Option<f64>,
    pub margins: Vec<f64>,
    pub error: Option<String>,
    pub wall_ms: f64,
}

/// Propagates one protocol instance from `|0>`.
pub fn evaluate_point(model: &LevelModel, protocol: &Protocol) -> PointResult {
    let start = Instant::now();
    let n_margins = protocol.margin_names().len();
    let outcome = (|| -> Result<(Vec<f64>, Option<f64>, Vec<f64>)> {
        let schedule = protocol.schedule(model)?;
        let populations = final_populations(model, &schedule)?;
        let lz = protocol.lz_prediction(model)?;
        let margins = protocol.margins(model)?;
        Ok((populations, lz, margins))
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((populations, lz, margins)) => PointResult {
            coords: Vec::new(),
            probability: Some(populations[protocol.target()].clamp(0.0, 1.0)),
            populations,
            lz,
            margins,
            error: None,
            wall_ms,
        },
        Err(e) => PointResult {
            coords: Vec::new(),
            probability: None,
            populations: Vec::new(),
            lz: None,
            margins: vec![f64::NAN; n_margins],
            error: Some(e.to_string()),
            wall_ms,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub axis_values: Vec<Vec<f64>>,
    pub margin_names: Vec<String>,
    pub points: Vec<PointResult>,
    pub wall_ms: f64,
}

/// Evaluates every grid point of `spec`.
pub fn run_sweep(model: &LevelModel, spec: &SweepSpec) -> Result<SweepResult> {
    let start = Instant::now();
    let axis_values = spec
        .axes
        .iter()
        .map(Axis::values)
        .collect::<Result<Vec<_>>>()?;
    let mut probe = spec.protocol.clone();
    for axis in &spec.axes {
        probe.set(&axis.name, axis.min)?;
    }
    let shape: Vec<usize> = axis_values.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let points: Vec<PointResult> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let coords = unravel(flat, &shape)
                .iter()
                .zip(&axis_values)
                .map(|(&i, v)| v[i])
                .collect::<Vec<_>>();
            let mut protocol = spec.protocol.clone();
            for (axis, &value) in spec.axes.iter().zip(&coords) {
                protocol.set(&axis.name, value).expect("axis names checked above");
            }
            PointResult {
                coords,
                ..evaluate_point(model, &protocol)
            }
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        axis_values,
        margin_names: spec.protocol.margin_names().iter().map(|s| s.to_string()).collect(),
        points,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for (slot, &n) in idx.iter_mut().zip(shape).rev() {
        *slot = flat % n;
        flat /= n;
    }
    idx
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn shape(&self) -> Vec<usize> {
        self.axis_values.iter().map(Vec::len).collect()
    }

    /// Target probabilities in grid order; failed points are NaN.
    pub fn probabilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.probability.unwrap_or(f64::NAN)).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.probability.is_none()).count()
    }

    /// Highest probability and its grid coordinates.
    pub fn max_probability(&self) -> Option<(f64, Vec<f64>)> {
        self.points
            .iter()
            .filter_map(|p| p.probability.map(|v| (v, p.coords.clone())))
            .fold(None, |best: Option<(f64, Vec<f64>)>, cand| match best {
                Some(b) if b.0 >= cand.0 => Some(b),
                _ => Some(cand),
            })
    }

    /// Fraction of grid points with probability above `level`.
    pub fn region_fraction(&self, level: f64) -> f64 {
        let above = self
            .points
            .iter()
            .filter(|p| p.probability.is_some_and(|v| v > level))
            .count();
        above as f64 / self.points.len().max(1) as f64
    }

    /// Region fraction times the product of axis extents, in axis units.
    pub fn region_area(&self, level: f64) -> f64 {
        let extent: f64 = self.spec.axes.iter().map(|a| a.max - a.min).product();
        self.region_fraction(level) * extent
    }

    /// Probability at a grid index tuple.
    pub fn at(&self, index: &[usize]) -> Option<f64> {
        let shape = self.shape();
        let mut flat = 0;
        for (&i, &n) in index.iter().zip(&shape) {
            if i >= n {
                return None;
            }
            flat = flat * n + i;
        }
        self.points.get(flat).and_then(|p| p.probability)
    }

    /// Index of the grid value of `axis` closest to `value`.
    pub fn nearest_index(&self, axis: usize, value: f64) -> Option<usize> {
        self.axis_values.get(axis).and_then(|vals| {
            vals.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - value).abs().total_cmp(&(b.1 - value).abs()))
                .map(|(i, _)| i)
        })
    }

    /// 1D cut of a 2D grid at the grid value of `fixed_axis` closest to `value`,
    /// as `(coordinate along the other axis, probability)`.
    pub fn slice(&self, fixed_axis: usize, value: f64) -> Result<Vec<(f64, f64)>> {
        if self.axis_values.len() != 2 || fixed_axis > 1 {
            return Err(Error::InvalidSweep("slices need a two-axis sweep".into()));
        }
        let k = self.nearest_index(fixed_axis, value).expect("axis exists");
        let free = 1 - fixed_axis;
        Ok(self.axis_values[free]
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let idx = if fixed_axis == 0 { [k, i] } else { [i, k] };
                (x, self.at(&idx).unwrap_or(f64::NAN))
            })
            .collect())
    }

    /// Level-set segments of a two-axis grid.
    pub fn contours(&self, level: f64) -> Result<Vec<Segment>> {
        if self.axis_values.len() != 2 {
            return Err(Error::InvalidSweep("contours need a two-axis sweep".into()));
        }
        Ok(contour_segments(
            &self.axis_values[0],
            &self.axis_values[1],
            &self.probabilities(),
            level,
        ))
    }

    /// One row per grid point. `timing` appends the per-point wall time, which
    /// makes the output run-dependent.
    pub fn write_csv<W: Write>(&self, writer: W, timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = self.spec.axes.iter().map(|a| a.name.clone()).collect();
        header.push("p_target".into());
        header.push("p_lz".into());
        header.extend(self.margin_names.iter().cloned());
        header.push("status".into());
        if timing {
            header.push("wall_ms".into());
        }
        w.write_record(&header)?;
        for p in &self.points {
            let mut row: Vec<String> = p.coords.iter().map(f64::to_string).collect();
            row.push(fmt_opt(p.probability));
            row.push(fmt_opt(p.lz));
            row.extend(p.margins.iter().map(|m| if m.is_nan() { String::new() } else { m.to_string() }));
            row.push(p.error.clone().unwrap_or_else(|| "ok".into()));
            if timing {
                row.push(p.wall_ms.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `level, x0, y0, x1, y1` rows for the given levels.
    pub fn write_contours_csv<W: Write>(&self, writer: W, levels: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let names: Vec<&str> = self.spec.axes.iter().map(|a| a.name.as_str()).collect();
        w.write_record([
            "level".to_string(),
            format!("{}_0", names[0]),
            format!("{}_0", names[1]),
            format!("{}_1", names[0]),
            format!("{}_1", names[1]),
        ])?;
        for &level in levels {
            for s in self.contours(level)? {
                w.write_record([level, s.x0, s.y0, s.x1, s.y1].map(|v| v.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Contiguous rate interval with high transfer probability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateInterval {
    pub rate_min: f64,
    pub rate_max: f64,
    /// Sweep duration at the fastest rate of the interval (s).
    pub shortest_duration: f64,
    /// Sweep duration at the slowest rate of the interval (s).
    pub longest_duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RampSweep {
    pub result: SweepResult,
    /// Longest run of consecutive rates with probability above 0.99.
    pub high_efficiency: Option<RateInterval>,
}

/// Longest run of consecutive values above `level`, as an index range.
pub fn longest_run_above(values: &[f64], level: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        if v > level {
            let s = *start.get_or_insert(i);
            if best.is_none_or(|(a, b)| i - s > b - a) {
                best = Some((s, i));
            }
        } else {
            start = None;
        }
    }
    best
}

/// Simulated and Landau-Zener transfer probabilities over a rate axis.
pub fn ramp_rate_sweep(model: &LevelModel, ramp: &RampProtocol, rates: Axis) -> Result<RampSweep> {
    let spec = SweepSpec {
        protocol: Protocol::Ramp(ramp.clone()),
        axes: vec![Axis { name: "rate".into(), ..rates }],
    };
    let result = run_sweep(model, &spec)?;
    let probs = result.probabilities();
    let rates = &result.axis_values[0];
    let high_efficiency = longest_run_above(&probs, HIGH_EFFICIENCY).map(|(a, b)| {
        let (lo, hi) = (rates[a].min(rates[b]), rates[a].max(rates[b]));
        let duration = |rate: f64| {
            RampProtocol { rate, ..ramp.clone() }.duration(model).unwrap_or(f64::NAN)
        };
        RateInterval {
            rate_min: lo,
            rate_max: hi,
            shortest_duration: duration(hi),
            longest_duration: duration(lo),
        }
    });
    Ok(RampSweep {
        result,
        high_efficiency,
    })
}

/// Transfer probability over pump peak and pump width; the Stark width tracks
/// the pump width through the protocol's width ratio.
pub fn scrap_contour(model: &LevelModel, protocol: &Protocol, peak: Axis, width: Axis) -> Result<SweepResult> {
    if !matches!(protocol, Protocol::Scrap1Atom(_) | Protocol::Scrap2Atom(_)) {
        return Err(Error::InvalidSweep("scrap_contour needs a SCRAP protocol".into()));
    }
    let spec = SweepSpec {
        protocol: protocol.clone(),
        axes: vec![
            Axis { name: "omega_hat".into(), ..peak },
            Axis { name: "t_omega".into(), ..width },
        ],
    };
    run_sweep(model, &spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub start: f64,
    pub end: f64,
    pub width: f64,
    pub peak: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub position: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelayScan {
    pub result: SweepResult,
    /// Connected region above 0.99 containing the grid point nearest zero delay.
    pub plateau: Option<Plateau>,
    /// Highest local maximum at delays below the plateau (or below zero).
    pub secondary: Option<Peak>,
}

/// Transfer probability over the pump delay.
pub fn delay_scan(model: &LevelModel, scrap: &ScrapProtocol, delays: Axis) -> Result<DelayScan> {
    let spec = SweepSpec {
        protocol: Protocol::Scrap1Atom(scrap.clone()),
        axes: vec![Axis { name: "delay".into(), ..delays }],
    };
    let result = run_sweep(model, &spec)?;
    let x = result.axis_values[0].clone();
    let p = result.probabilities();
    let zero = result.nearest_index(0, 0.0).expect("non-empty axis");
    let plateau = (p[zero] > HIGH_EFFICIENCY).then(|| {
        let mut a = zero;
        while a > 0 && p[a - 1] > HIGH_EFFICIENCY {
            a -= 1;
        }
        let mut b = zero;
        while b + 1 < p.len() && p[b + 1] > HIGH_EFFICIENCY {
            b += 1;
        }
        Plateau {
            start: x[a],
            end: x[b],
            width: x[b] - x[a],
            peak: p[a..=b].iter().copied().fold(f64::MIN, f64::max),
        }
    });
    let cutoff = plateau.map_or(0.0, |pl| pl.start);
    let secondary = (1..p.len().saturating_sub(1))
        .filter(|&i| x[i] < cutoff && p[i] >= p[i - 1] && p[i] >= p[i + 1] && p[i] > p[i - 1].min(p[i + 1]))
        .map(|i| Peak {
            position: x[i],
            probability: p[i],
        })
        .fold(None, |best: Option<Peak>, c| match best {
            Some(b) if b.probability >= c.probability => Some(b),
            _ => Some(c),
        });
    Ok(DelayScan {
        result,
        plateau,
        secondary,
    })
}

/// Transfer probability of a resonant Gaussian over peak drive and width.
pub fn pipulse_contour(model: &LevelModel, pi: &PiProtocol, peak: Axis, width: Axis) -> Result<SweepResult> {
    let spec = SweepSpec {
        protocol: Protocol::PiPulse(pi.clone()),
        axes: vec![
            Axis { name: "omega_hat".into(), ..peak },
            Axis { name: "t_omega".into(), ..width },
        ],
    };
    run_sweep(model, &spec)
}

/// Single evaluation of two consecutive pi pulses, as a sweep without axes.
pub fn sequential_pi(model: &LevelModel, protocol: &SequentialPiProtocol) -> Result<SweepResult> {
    let spec = SweepSpec {
        protocol: Protocol::SequentialPi(protocol.clone()),
        axes: Vec::new(),
    };
    run_sweep(model, &spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::log("rate", 1e5, 1e8, 61).values().unwrap();
        assert_eq!(a.len(), 61);
        assert_eq!(a[0], 1e5);
        assert_eq!(a[60], 1e8);
        assert!((a[20] / 1e6 - 1.0).abs() < 1e-12);
        let l = Axis::linear("x", 0.0, 30.0, 41).values().unwrap();
        assert_eq!(l[20], 15.0);
        assert!(Axis::linear("x", 1.0, 1.0, 3).values().is_err());
        assert!(Axis::linear("x", 0.0, 1.0, 1).values().is_err());
        assert!(Axis::log("x", 0.0, 1.0, 3).values().is_err());
    }

    #[test]
    fn unravel_is_row_major() {
        assert_eq!(unravel(0, &[2, 3]), vec![0, 0]);
        assert_eq!(unravel(4, &[2, 3]), vec![1, 1]);
        assert_eq!(unravel(5, &[2, 3]), vec![1, 2]);
        assert_eq!(unravel(0, &[]), Vec::<usize>::new());
    }

    #[test]
    fn longest_run() {
        let v = [0.5, 0.995, 0.999, 0.2, 0.991, 0.992, 0.993, 0.1];
        assert_eq!(longest_run_above(&v, 0.99), Some((4, 6)));
        assert_eq!(longest_run_above(&[0.1, 0.2], 0.99), None);
    }
}
