use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use tweezer_core::analytics::validity_check;
use tweezer_core::experiments::{
    delay_scan, optimize_pulse, ramp_rate_sweep, run_sweep, Protocol, SweepResult, SweepSpec,
    HIGH_EFFICIENCY, LOW_EFFICIENCY,
};
use tweezer_core::propagator::{propagate, transfer_probability, StateVector};

use crate::config::Resolved;
use crate::failure::{Failure, EXIT_NUMERICAL, EXIT_WARNING};
use crate::output::OutDir;

/// Shared inputs of every command.
pub struct Context<'a> {
    /// The configuration file exactly as read, echoed into metadata.
    pub raw: &'a Value,
    pub resolved: Resolved,
    pub out: OutDir,
    pub timing: bool,
}

#[derive(Serialize)]
struct Row {
    name: &'static str,
    value: f64,
    unit: &'static str,
}

fn row(name: &'static str, value: f64, unit: &'static str) -> Row {
    Row { name, value, unit }
}

fn print_rows(rows: &[Row]) {
    for r in rows {
        println!("{:<26} {:>24e} {}", r.name, r.value, r.unit);
    }
}

pub fn params(ctx: &Context) -> Result<i32, Failure> {
    let model = ctx.resolved.model()?;
    let d = model.derived();
    let res = model.resonance_detunings();
    let peak = ctx.resolved.protocol.peak_drive(&model)?;
    let rows = vec![
        row("hbar", d.hbar, "J s"),
        row("osc_length_x", d.osc_lengths[0], "m"),
        row("osc_length_y", d.osc_lengths[1], "m"),
        row("osc_length_z", d.osc_lengths[2], "m"),
        row("g_aa", d.g_aa, "J m^3"),
        row("g_bb", d.g_bb, "J m^3"),
        row("g_ab", d.g_ab, "J m^3"),
        row("mu", d.mu, "J"),
        row("mu_rate", d.to_rate(d.mu), "rad/s"),
        row("delta_e_coll", d.delta_e_coll, "J"),
        row("delta_e_coll_rate", d.to_rate(d.delta_e_coll), "rad/s"),
        row("e_sc_per_atom", d.e_sc_per_atom, "J"),
        row("e_sc_per_atom_rate", d.to_rate(d.e_sc_per_atom), "rad/s"),
        row("zero_point_energy", d.zero_point_energy, "J"),
        row("e1", d.e1, "J"),
        row("e1_rate", d.to_rate(d.e1), "rad/s"),
        row("e2", d.e2, "J"),
        row("e2_rate", d.to_rate(d.e2), "rad/s"),
        row("overlap_factor", d.overlap_factor, "1"),
        row("resonance_zero_one", res.zero_one, "rad/s"),
        row("resonance_one_two", res.one_two, "rad/s"),
        row("resonance_zero_two", res.zero_two, "rad/s"),
        row("min_nu_a", d.min_nu_a, "rad/s"),
        row("peak_drive", peak, "rad/s"),
        row("peak_coupling_zero_one", model.rabi_coupling(0, peak)?, "rad/s"),
        row("two_photon_rabi", model.two_photon_rabi(peak)?, "rad/s"),
    ];
    print_rows(&rows);
    let warnings: Vec<String> = d.warnings.iter().map(ToString::to_string).collect();
    for w in &warnings {
        println!("warning: {w}");
    }
    ctx.out.write_json(
        "params.json",
        &json!({ "parameters": rows, "warnings": d.warnings, "system": ctx.resolved.system }),
    )?;
    Ok(if warnings.is_empty() { 0 } else { EXIT_WARNING })
}

pub fn propagate_cmd(ctx: &Context) -> Result<i32, Failure> {
    let model = ctx.resolved.model()?;
    let protocol = &ctx.resolved.protocol;
    let schedule = protocol.schedule(&model)?;
    let initial = StateVector::basis(model.dim(), 0);
    let traj = propagate(&model, &schedule, &initial, &ctx.resolved.step_control)?;
    ctx.out.write("trajectory.csv", |w| Ok(traj.write_csv(w)?))?;
    let target = protocol.target();
    let probability = transfer_probability(&traj, target)?;
    let populations = traj.final_state().populations();
    ctx.out.write_json(
        "final.json",
        &json!({
            "protocol": protocol,
            "target": target,
            "probability": probability,
            "populations": populations,
            "window_s": [schedule.t_start(), schedule.t_end()],
            "step_s": traj.step(),
            "steps": traj.steps(),
            "samples": traj.times().len(),
            "lz_prediction": protocol.lz_prediction(&model)?,
        }),
    )?;
    println!("P(0->{target}) = {probability}");
    println!("populations = {populations:?}");
    Ok(0)
}

#[derive(Serialize)]
struct SweepSummary {
    points: usize,
    failures: usize,
    max_probability: Option<f64>,
    max_at: Option<Vec<f64>>,
    region_fraction_high: f64,
    region_area_high: f64,
    region_fraction_low: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_interval: Option<tweezer_core::experiments::RateInterval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plateau: Option<tweezer_core::experiments::Plateau>,
    #[serde(skip_serializing_if = "Option::is_none")]
    secondary_maximum: Option<tweezer_core::experiments::Peak>,
}

fn summarize(result: &SweepResult) -> SweepSummary {
    let best = result.max_probability();
    SweepSummary {
        points: result.points.len(),
        failures: result.failures(),
        max_probability: best.as_ref().map(|b| b.0),
        max_at: best.map(|b| b.1),
        region_fraction_high: result.region_fraction(HIGH_EFFICIENCY),
        region_area_high: result.region_area(HIGH_EFFICIENCY),
        region_fraction_low: 1.0 - result.region_fraction(LOW_EFFICIENCY),
        rate_interval: None,
        plateau: None,
        secondary_maximum: None,
    }
}

pub fn sweep(ctx: &Context) -> Result<i32, Failure> {
    let model = ctx.resolved.model()?;
    let axes = ctx
        .resolved
        .axes
        .clone()
        .ok_or_else(|| Failure::config("sweep needs `sweep.axes` or a preset with default axes"))?;
    let spec = SweepSpec {
        protocol: ctx.resolved.protocol.clone(),
        axes,
    };
    let names: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    let start = Instant::now();
    let (result, summary) = match (&spec.protocol, names.as_slice()) {
        (Protocol::Ramp(ramp), ["rate"]) => {
            let s = ramp_rate_sweep(&model, ramp, spec.axes[0].clone())?;
            let mut summary = summarize(&s.result);
            summary.rate_interval = s.high_efficiency;
            (s.result, summary)
        }
        (Protocol::Scrap1Atom(scrap), ["delay"]) => {
            let s = delay_scan(&model, scrap, spec.axes[0].clone())?;
            let mut summary = summarize(&s.result);
            summary.plateau = s.plateau;
            summary.secondary_maximum = s.secondary;
            (s.result, summary)
        }
        _ => {
            let r = run_sweep(&model, &spec)?;
            let summary = summarize(&r);
            (r, summary)
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    ctx.out.write("sweep.csv", |w| Ok(result.write_csv(w, ctx.timing)?))?;
    if spec.axes.len() == 2 {
        let levels = &ctx.resolved.contour_levels;
        ctx.out.write("contours.csv", |w| Ok(result.write_contours_csv(w, levels)?))?;
    }
    let mut meta = json!({
        "config": ctx.raw,
        "resolved": ctx.resolved,
        "spec": spec,
        "margin_names": result.margin_names,
        "summary": summary,
    });
    if ctx.timing {
        meta["wall_ms"] = json!(wall_ms);
    }
    ctx.out.write_json("sweep.json", &meta)?;
    let at = summary
        .max_at
        .as_ref()
        .map(|c| format!("{c:?}"))
        .unwrap_or_else(|| "-".into());
    println!(
        "sweep: {} points, {} failed, max P = {} at {at}, area(P > 0.99) = {:e}",
        summary.points,
        summary.failures,
        summary.max_probability.map_or("-".to_string(), |p| p.to_string()),
        summary.region_area_high
    );
    if summary.failures == summary.points && summary.points > 0 {
        let first = result.points.iter().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(Failure::numerical(format!("every grid point failed; first error: {first}")));
    }
    Ok(0)
}

pub fn check(ctx: &Context) -> Result<i32, Failure> {
    let model = ctx.resolved.model()?;
    let protocol = &ctx.resolved.protocol;
    let peak = protocol.peak_drive(&model)?;
    let report = validity_check(&model, peak, &ctx.resolved.validity_inputs())?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "protocol {} at peak drive {peak:e} rad/s", protocol.name()).ok();
    for (name, c) in report.checks() {
        writeln!(stdout, "{name:<20} margin {:>14e}  {:?}", c.margin, c.verdict).ok();
    }
    if let Some(alpha) = report.alpha_ad {
        writeln!(stdout, "{:<20} {alpha:e}", "alpha_ad").ok();
    }
    writeln!(stdout, "{:<20} {:e} rad/s^2", "ramp_rate_limit", report.ramp_rate_limit).ok();
    writeln!(stdout, "{:<20} {:e} rad/s^2", "ramp_rate_limit_gap", report.ramp_rate_limit_splitting).ok();
    writeln!(stdout, "{:<20} {:e} s", "tau_min", report.tau_min).ok();
    if let Some(b) = report.scrap_pump_bound {
        writeln!(stdout, "{:<20} {:e} s (jump time {:e} s)", "pump_width_min", b.min_width, b.jump_time).ok();
    }
    let strong = report.all_strong();
    writeln!(stdout, "verdict: {}", if strong { "all strong" } else { "weak or failed margins" }).ok();
    ctx.out.write_json("check.json", &json!({ "protocol": protocol, "report": report, "all_strong": strong }))?;
    Ok(if strong { 0 } else { EXIT_WARNING })
}

pub fn optimize(ctx: &Context) -> Result<i32, Failure> {
    let model = ctx.resolved.model()?;
    let (Some(bounds), Some(options)) = (&ctx.resolved.bounds, &ctx.resolved.optimize) else {
        return Err(Failure::config("optimize needs `optimize.bounds`"));
    };
    let result = optimize_pulse(&model, &ctx.resolved.protocol, bounds, options)?;
    if !result.probability.is_finite() {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: "no evaluation succeeded".into(),
        });
    }
    let units = ctx.resolved.units;
    let parameters: Vec<_> = result
        .parameters
        .iter()
        .map(|(name, v)| json!({ "name": name, "value_si": v, "value_config": units.config_value(name, *v) }))
        .collect();
    for (name, v) in &result.parameters {
        println!("{name} = {} (config units), {v:e} (SI)", units.config_value(name, *v));
    }
    println!(
        "P(0->{}) = {} after {} evaluations, converged = {}",
        ctx.resolved.protocol.target(),
        result.probability,
        result.evaluations,
        result.converged
    );
    ctx.out.write_json(
        "optimize.json",
        &json!({
            "config": ctx.raw,
            "parameters": parameters,
            "probability": result.probability,
            "evaluations": result.evaluations,
            "converged": result.converged,
            "seed": options.seed,
            "protocol": result.protocol,
            "history": result.history,
        }),
    )?;
    Ok(0)
}
