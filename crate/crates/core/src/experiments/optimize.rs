use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_point, Protocol};
use crate::error::{Error, Result};
use crate::levels::LevelModel;

/// Smallest evaluation budget accepted.
pub const MIN_BUDGET: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeOptions {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Seed for the random start when `start` is absent.
    #[serde(default)]
    pub seed: u64,
    /// Starting point in parameter units; clamped into the bounds.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// Initial simplex edge as a fraction of each bound range.
    #[serde(default = "default_step")]
    pub initial_step: f64,
    /// Convergence threshold on the simplex size, as a fraction of each range.
    #[serde(default = "default_x_tol")]
    pub x_tol: f64,
    /// Convergence threshold on the spread of objective values.
    #[serde(default = "default_f_tol")]
    pub f_tol: f64,
}

fn default_step() -> f64 {
    0.2
}
fn default_x_tol() -> f64 {
    1e-6
}
fn default_f_tol() -> f64 {
    1e-10
}

impl OptimizeOptions {
    pub fn new(budget: usize) -> Self {
        OptimizeOptions {
            budget,
            seed: 0,
            start: None,
            initial_step: default_step(),
            x_tol: default_x_tol(),
            f_tol: default_f_tol(),
        }
    }
}

/// Outcome of a bounded simplex search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each evaluation; nondecreasing.
    pub history: Vec<f64>,
}

/// Maximizes `objective` over a box with the Nelder-Mead simplex method.
///
/// The search runs in coordinates scaled to the unit cube; trial points are
/// clamped into it, so no point outside the bounds is ever evaluated.
/// Non-finite objective values rank below every finite one.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    bounds: &[(f64, f64)],
    options: &OptimizeOptions,
) -> Result<SearchResult> {
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::Optimizer("no parameters to optimize".into()));
    }
    if options.budget < MIN_BUDGET {
        return Err(Error::Optimizer(format!("budget must be at least {MIN_BUDGET}")));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Optimizer(format!("invalid bound [{lo}, {hi}]")));
        }
    }
    let to_x = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(&u, &(lo, hi))| lo + u.clamp(0.0, 1.0) * (hi - lo))
            .collect()
    };
    let start: Vec<f64> = match &options.start {
        Some(x) if x.len() == dim => x
            .iter()
            .zip(bounds)
            .map(|(&x, &(lo, hi))| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect(),
        Some(x) => {
            return Err(Error::Optimizer(format!(
                "start has {} values for {dim} parameters",
                x.len()
            )))
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            (0..dim).map(|_| rng.gen::<f64>()).collect()
        }
    };

    let mut evaluations = 0;
    let mut history = Vec::with_capacity(options.budget);
    let mut best_seen = f64::NEG_INFINITY;
    // Minimize the negated objective; failures become +inf.
    let mut eval = |u: &[f64], evaluations: &mut usize, history: &mut Vec<f64>| -> f64 {
        let v = objective(&to_x(u));
        *evaluations += 1;
        let cost = if v.is_finite() { -v } else { f64::INFINITY };
        if -cost > best_seen {
            best_seen = -cost;
        }
        history.push(best_seen);
        cost
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.clone(), eval(&start, &mut evaluations, &mut history)));
    for k in 0..dim {
        let mut v = start.clone();
        v[k] = if v[k] + options.initial_step <= 1.0 {
            v[k] + options.initial_step
        } else {
            v[k] - options.initial_step
        };
        let f = eval(&v, &mut evaluations, &mut history);
        simplex.push((v, f));
    }

    let mut converged = false;
    while evaluations < options.budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        // An all-failed simplex has a NaN spread and converges on size alone.
        if (spread <= options.f_tol || spread.is_nan()) && size <= options.x_tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(v, _)| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(&c, &w)| (c + t * (c - w)).clamp(0.0, 1.0))
                .collect()
        };
        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations, &mut history);
        if fr < simplex[0].1 {
            if evaluations >= options.budget {
                simplex[dim] = (reflected, fr);
                break;
            }
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations, &mut history);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            if evaluations >= options.budget {
                break;
            }
            let (contracted, fc) = if fr < simplex[dim].1 {
                let c = along(0.5);
                let f = eval(&c, &mut evaluations, &mut history);
                (c, f)
            } else {
                let c = along(-0.5);
                let f = eval(&c, &mut evaluations, &mut history);
                (c, f)
            };
            if fc < fr.min(simplex[dim].1) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if evaluations >= options.budget {
                        break;
                    }
                    let v: Vec<f64> = vertex.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let f = eval(&v, &mut evaluations, &mut history);
                    *vertex = (v, f);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(SearchResult {
        best: to_x(&simplex[0].0),
        value: -simplex[0].1,
        evaluations,
        converged,
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub protocol: Protocol,
    pub parameters: Vec<(String, f64)>,
    /// Target probability at `parameters`.
    pub probability: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Maximizes the protocol's target probability over the bounded parameters.
pub fn optimize_pulse(
    model: &LevelModel,
    protocol: &Protocol,
    bounds: &[Bound],
    options: &OptimizeOptions,
) -> Result<OptimizeResult> {
    let mut probe = protocol.clone();
    for b in bounds {
        probe.set(&b.name, b.min)?;
    }
    let boxes: Vec<(f64, f64)> = bounds.iter().map(|b| (b.min, b.max)).collect();
    let with = |x: &[f64]| {
        let mut p = protocol.clone();
        for (b, &v) in bounds.iter().zip(x) {
            p.set(&b.name, v).expect("parameter names checked above");
        }
        p
    };
    let search = nelder_mead(
        |x| evaluate_point(model, &with(x)).probability.unwrap_or(f64::NAN),
        &boxes,
        options,
    )?;
    let best = with(&search.best);
    Ok(OptimizeResult {
        parameters: bounds.iter().map(|b| b.name.clone()).zip(search.best.iter().copied()).collect(),
        protocol: best,
        probability: search.value,
        evaluations: search.evaluations,
        converged: search.converged,
        history: search.history,
    })
}
