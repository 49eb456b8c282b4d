//! Sweep, scan and optimizer behaviour on the named presets.

use std::f64::consts::PI;

use tweezer_core::experiments::{
    evaluate_point, optimize_pulse, pipulse_contour, ramp_rate_sweep, run_sweep, scrap_contour,
    sequential_pi, Axis, Bound, OptimizeOptions, PiProtocol, Protocol, RampProtocol,
    SequentialPiProtocol, SweepSpec, LOW_EFFICIENCY,
};
use tweezer_core::presets::preset;
use tweezer_core::pulses::{gaussian_peak_for_area, Transition};

fn csv_of(result: &tweezer_core::experiments::SweepResult) -> Vec<u8> {
    let mut out = Vec::new();
    result.write_csv(&mut out, false).unwrap();
    out
}

fn small_scrap_spec() -> SweepSpec {
    let p = preset("fig4").unwrap();
    SweepSpec {
        protocol: p.protocol,
        axes: vec![
            Axis::linear("omega_hat", 5e3, 25e3, 4),
            Axis::linear("t_omega", 0.6e-3, 1.4e-3, 3),
        ],
    }
}

#[test]
fn identical_specs_give_identical_csv() {
    let model = preset("fig4").unwrap().model().unwrap();
    let spec = small_scrap_spec();
    let a = csv_of(&run_sweep(&model, &spec).unwrap());
    let b = csv_of(&run_sweep(&model, &spec).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("omega_hat,t_omega,p_target,p_lz,"));
    assert_eq!(text.lines().count(), 1 + 12);
}

#[test]
fn grid_points_equal_standalone_runs() {
    let model = preset("fig4").unwrap().model().unwrap();
    let spec = small_scrap_spec();
    let result = run_sweep(&model, &spec).unwrap();
    for point in &result.points {
        let mut protocol = spec.protocol.clone();
        protocol.set("omega_hat", point.coords[0]).unwrap();
        protocol.set("t_omega", point.coords[1]).unwrap();
        let alone = evaluate_point(&model, &protocol).probability.unwrap();
        assert!((alone - point.probability.unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn probabilities_are_valid_and_grid_complete() {
    let model = preset("fig4").unwrap().model().unwrap();
    let result = run_sweep(&model, &small_scrap_spec()).unwrap();
    assert_eq!(result.points.len(), 12);
    for p in &result.points {
        let v = p.probability.unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert!((p.populations.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn larger_trap_admits_faster_ramps() {
    let rates = Axis::log("rate", 1e5, 1e9, 41);
    let mut limits = Vec::new();
    for name in ["fig3a", "fig3b"] {
        let p = preset(name).unwrap();
        let model = p.model().unwrap();
        let Protocol::Ramp(ramp) = p.protocol else { unreachable!() };
        let sweep = ramp_rate_sweep(&model, &ramp, rates.clone()).unwrap();
        limits.push(sweep.high_efficiency.expect("high-efficiency interval").rate_max);
    }
    assert!(limits[1] > limits[0], "{limits:?}");
}

#[test]
fn sudden_ramp_transfers_nothing() {
    let p = preset("fig3a").unwrap();
    let model = p.model().unwrap();
    let Protocol::Ramp(ramp) = p.protocol else { unreachable!() };
    // Without switching the drive is on only while the detuning sweeps.
    let bare = RampProtocol {
        switch_time: None,
        ..ramp
    };
    let sweep = ramp_rate_sweep(&model, &bare, Axis::log("rate", 1e9, 1e12, 4)).unwrap();
    let probs = sweep.result.probabilities();
    assert!(probs.windows(2).all(|w| w[1] <= w[0]));
    assert!(probs[3] < 1e-3, "{probs:?}");
}

#[test]
fn vanishing_pump_transfers_nothing() {
    for name in ["fig4", "fig6"] {
        let p = preset(name).unwrap();
        let model = p.model().unwrap();
        let result = scrap_contour(
            &model,
            &p.protocol,
            Axis::linear("omega_hat", 0.0, 1e3, 2),
            Axis::linear("t_omega", 1e-3, 2e-3, 2),
        )
        .unwrap();
        assert!(result.at(&[0, 0]).unwrap() < 1e-12);
        assert!(result.at(&[0, 1]).unwrap() < 1e-12);
    }
}

#[test]
fn pi_slice_peaks_at_unit_area() {
    let p = preset("fig7").unwrap();
    let model = p.model().unwrap();
    let Protocol::PiPulse(pi) = p.protocol else { unreachable!() };
    let width = 1.5e-3;
    let area_pi = gaussian_peak_for_area(&model, Transition::ZeroOne, width, PI).unwrap();
    let peaks = Axis::linear("omega_hat", area_pi * 0.5, area_pi * 1.5, 21);
    let result = pipulse_contour(&model, &pi, peaks, Axis::linear("t_omega", width, width * 1.001, 2)).unwrap();
    let slice = result.slice(1, width).unwrap();
    let best = slice.iter().cloned().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    assert!((best.0 - area_pi).abs() < 1e-9 * area_pi, "maximum at {} instead of {area_pi}", best.0);
}

#[test]
fn pi_slice_oscillates_with_pulse_strength() {
    let p = preset("fig7").unwrap();
    let model = p.model().unwrap();
    let Protocol::PiPulse(pi) = p.protocol else { unreachable!() };
    let width = 1.5e-3;
    let area_pi = gaussian_peak_for_area(&model, Transition::ZeroOne, width, PI).unwrap();
    let at = |peak: f64| {
        evaluate_point(&model, &Protocol::PiPulse(PiProtocol { omega_hat: Some(peak), t_omega: width, ..pi.clone() }))
            .probability
            .unwrap()
    };
    assert!(at(area_pi) > 0.99);
    assert!(at(2.0 * area_pi) < 0.05);
    assert!(at(3.0 * area_pi) > 0.9);
}

#[test]
fn strong_short_pulses_lose_selectivity() {
    let p = preset("fig7").unwrap();
    let model = p.model().unwrap();
    let Protocol::PiPulse(pi) = p.protocol else { unreachable!() };
    let result = pipulse_contour(
        &model,
        &pi,
        Axis::linear("omega_hat", 0.0, 12e3, 13),
        Axis::linear("t_omega", 0.2e-3, 3e-3, 8),
    )
    .unwrap();
    let low = result.probabilities().iter().filter(|&&v| v < LOW_EFFICIENCY).count();
    assert!(low > 0);
    assert!(!result.contours(LOW_EFFICIENCY).unwrap().is_empty());
}

#[test]
fn omitting_the_second_pulse_stops_at_one_atom() {
    let model = preset("fig7_sequential").unwrap().model().unwrap();
    let one = SequentialPiProtocol {
        t_omega: 2e-3,
        separation_widths: 10.0,
        second_pulse: false,
    };
    let result = sequential_pi(&model, &one).unwrap();
    let pops = &result.points[0].populations;
    assert!(pops[1] > 0.99, "{pops:?}");
    assert!(pops[2] < 1e-3, "{pops:?}");
    let both = sequential_pi(&model, &SequentialPiProtocol { second_pulse: true, ..one }).unwrap();
    assert!(both.points[0].probability.unwrap() > 0.99);
}

#[test]
fn pi_amplitude_search_recovers_unit_area() {
    let p = preset("fig7").unwrap();
    let model = p.model().unwrap();
    let width = 1.5e-3;
    let protocol = Protocol::PiPulse(PiProtocol {
        omega_hat: Some(2e3),
        t_omega: width,
        transition: Transition::ZeroOne,
    });
    let area_pi = gaussian_peak_for_area(&model, Transition::ZeroOne, width, PI).unwrap();
    let bounds = [Bound {
        name: "omega_hat".into(),
        min: 1e3,
        max: 4e3,
    }];
    let result = optimize_pulse(&model, &protocol, &bounds, &OptimizeOptions::new(60)).unwrap();
    let found = result.parameters[0].1;
    assert!((1e3..=4e3).contains(&found));
    assert!((found / area_pi - 1.0).abs() < 0.02, "found {found}, expected {area_pi}");
    assert!(result.history.windows(2).all(|w| w[1] >= w[0]));
    let fresh = evaluate_point(&model, &result.protocol).probability.unwrap();
    assert!((fresh - result.probability).abs() <= 1e-10);
}

#[test]
fn scrap_search_reaches_high_efficiency() {
    let p = preset("fig4").unwrap();
    let model = p.model().unwrap();
    let bounds = [
        Bound {
            name: "omega_hat".into(),
            min: 10e3,
            max: 25e3,
        },
        Bound {
            name: "t_omega".into(),
            min: 0.8e-3,
            max: 1.6e-3,
        },
    ];
    let options = OptimizeOptions {
        seed: 3,
        ..OptimizeOptions::new(30)
    };
    let result = optimize_pulse(&model, &p.protocol, &bounds, &options).unwrap();
    assert!(result.probability > 0.99);
    for ((_, v), b) in result.parameters.iter().zip(&bounds) {
        assert!(*v >= b.min && *v <= b.max);
    }
    let fresh = evaluate_point(&model, &result.protocol).probability.unwrap();
    assert!((fresh - result.probability).abs() <= 1e-10);
    let again = optimize_pulse(&model, &p.protocol, &bounds, &options).unwrap();
    assert_eq!(again, result);
}

#[test]
fn unknown_axis_is_rejected_before_running() {
    let model = preset("fig4").unwrap().model().unwrap();
    let spec = SweepSpec {
        protocol: preset("fig4").unwrap().protocol,
        axes: vec![Axis::linear("rate", 1.0, 2.0, 2)],
    };
    assert!(run_sweep(&model, &spec).is_err());
}
