mod common;

use usc_cascade::correlations::{c_max, default_t_grid, delayed_c, CorrelationRequest, RegressionMethod};
use usc_cascade::hierarchy::{evolve, EvolveOptions, Observable, Sampling};
use usc_cascade::integrate::StepPolicy;

const POLICY: StepPolicy = StepPolicy::Etd { h: 0.4 };

#[test]
fn zero_delay_matches_equal_time_correlation() {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    let grid = default_t_grid(&p, 0.0, 60);
    let req = CorrelationRequest { tau_d: 0.0, t_grid: grid.clone(), method: RegressionMethod::default() };
    let delayed = delayed_c(&m, &p, POLICY, &req).unwrap().series;
    let mut opts = EvolveOptions::new(*grid.last().unwrap(), POLICY).record(vec![Observable::EqualTimeC]);
    opts.sampling = Sampling::Times(grid);
    let direct = evolve(&m, &p, &opts).unwrap().series;
    let (a, b) = (delayed.get("C").unwrap(), direct.get("C").unwrap());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-9, "{diff}");
    assert!(c_max(&delayed) > 1e-4);
}

#[test]
fn forward_sandwich_agrees_with_adjoint() {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    let tau = 150.0;
    let grid = default_t_grid(&p, tau, 12);
    let run = |method| delayed_c(&m, &p, POLICY, &CorrelationRequest { tau_d: tau, t_grid: grid.clone(), method }).unwrap();
    let adj = run(RegressionMethod::Adjoint { step: 0.2 }).series;
    let fwd = run(RegressionMethod::ForwardSandwich { checkpoint_stride: 100.0 }).series;
    let (a, b) = (adj.get("C").unwrap(), fwd.get("C").unwrap());
    let peak = a.iter().copied().fold(0.0, f64::max);
    assert!(peak > 1e-5);
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-6 * peak, "{x} vs {y}");
    }
}

#[test]
fn correlation_decays_with_delay() {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    let cm = |tau: f64| {
        let req = CorrelationRequest { tau_d: tau, t_grid: default_t_grid(&p, tau, 80), method: RegressionMethod::default() };
        c_max(&delayed_c(&m, &p, POLICY, &req).unwrap().series)
    };
    let (c0, c1, c2) = (cm(0.0), cm(150.0), cm(300.0));
    assert!(c0 > c1 && c1 > c2 && c2 > 0.0, "{c0} {c1} {c2}");
}

#[test]
fn early_targets_are_skipped() {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    let req = CorrelationRequest { tau_d: 100.0, t_grid: vec![50.0, 150.0, 250.0], method: RegressionMethod::default() };
    let out = delayed_c(&m, &p, POLICY, &req).unwrap();
    assert_eq!(out.skipped, vec![0]);
    assert_eq!(out.series.get("C").unwrap()[0], 0.0);
}

#[test]
fn no_correlation_without_transmission() {
    let m = common::small_model(0.0, 0.0);
    let p = common::small_pulse(&m);
    let req = CorrelationRequest { tau_d: 0.0, t_grid: default_t_grid(&p, 0.0, 40), method: RegressionMethod::default() };
    let c = delayed_c(&m, &p, POLICY, &req).unwrap().series;
    assert!(c_max(&c).abs() < 1e-14);
}
