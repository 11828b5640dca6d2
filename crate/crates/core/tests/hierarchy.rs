mod common;

use usc_cascade::hierarchy::{
    evolve, hierarchy_derivative, init_hierarchy, tolerance, EvolveOptions, HierarchyState, Observable, Sampling,
};
use usc_cascade::integrate::StepPolicy;
use usc_cascade::operator::{self, Operator, C64};
use usc_cascade::pulse::{make_gaussian_pulse, vacuum};

fn run(policy: StepPolicy, t_end: f64) -> usc_cascade::hierarchy::Evolution {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    evolve(&m, &p, &EvolveOptions::new(t_end, policy).sample_every(2.0)).unwrap()
}

#[test]
fn step_halving_is_below_1e_6() {
    let coarse = run(StepPolicy::Etd { h: 0.4 }, 1050.0);
    let fine = run(StepPolicy::Etd { h: 0.2 }, 1050.0);
    let diff = coarse.series.max_abs_diff(&fine.series);
    assert!(diff < 1e-6, "{diff}");
    assert!(coarse.series.max("S1dagS1") > 1e-2);
}

#[test]
fn classic_rk4_agrees_with_etd() {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    let t_end = 500.0;
    let rk = usc_cascade::hierarchy::rk4_policy(&m, &p).unwrap();
    let times: Vec<f64> = (0..=50).map(|k| 10.0 * k as f64).collect();
    let opts = |policy| {
        let mut o = EvolveOptions::new(t_end, policy);
        o.sampling = Sampling::Times(times.clone());
        o
    };
    let a = evolve(&m, &p, &opts(rk)).unwrap();
    let b = evolve(&m, &p, &opts(StepPolicy::Etd { h: 0.2 })).unwrap();
    let diff = a.series.max_abs_diff(&b.series);
    assert!(diff < 1e-7, "{diff}");
}

#[test]
fn invariants_hold_along_a_run() {
    let ev = run(StepPolicy::Etd { h: 0.4 }, 1050.0);
    let r = ev.invariants;
    assert!(r.samples > 500);
    assert!(r.trace_error < tolerance::TRACE, "{r:?}");
    assert!(r.hermiticity_error < tolerance::HERMITICITY, "{r:?}");
    assert!(r.pairing_error < tolerance::HERMITICITY, "{r:?}");
    assert!(r.min_eigenvalue > tolerance::POSITIVITY, "{r:?}");
}

#[test]
fn vacuum_input_leaves_the_ground_state() {
    let m = common::small_model(1.0, 0.0);
    let p = vacuum(common::small_carrier(&m));
    let opts = EvolveOptions::new(500.0, StepPolicy::Etd { h: 0.4 }).record(vec![
        Observable::S1dagS1,
        Observable::S2dagS2,
        Observable::A1dagA1,
        Observable::A2dagA2,
        Observable::EqualTimeC,
    ]);
    let ev = evolve(&m, &p, &opts).unwrap();
    for (name, v) in &ev.series.channels {
        assert!(v.iter().all(|x| x.abs() < 1e-12), "{name}");
    }
}

#[test]
fn excitation_relaxes_after_the_pulse() {
    // Dressed qubit-like states leak only weakly through the cavities, so give
    // the qubits their own decay.
    let m = common::small_model(1.0, 0.01);
    let p = common::small_pulse(&m);
    // Pulse gone by 3T + 4T; then wait 40 lifetimes.
    let ev = evolve(&m, &p, &EvolveOptions::new(1050.0 + 4000.0, StepPolicy::Etd { h: 0.4 }).sample_every(10.0)).unwrap();
    let s1 = ev.series.get("S1dagS1").unwrap();
    let s2 = ev.series.get("S2dagS2").unwrap();
    assert!(*s1.last().unwrap() < 1e-6 * ev.series.max("S1dagS1"));
    assert!(*s2.last().unwrap() < 1e-6 * ev.series.max("S2dagS2"));
    let g = m.ground_projector();
    let pop = operator::expect(&g, &ev.state.rho11).unwrap().re;
    assert!((pop - 1.0).abs() < 1e-6, "{pop}");
}

#[test]
fn downstream_peak_is_later() {
    let ev = run(StepPolicy::Etd { h: 0.4 }, 1050.0);
    assert!(ev.series.argmax_time("S2dagS2").unwrap() > ev.series.argmax_time("S1dagS1").unwrap());
}

fn pseudo_random(d: usize, seed: usize) -> Operator {
    Operator::from_shape_fn((d, d), |(i, j)| {
        let k = (i * d + j) * 7919 + seed * 104729;
        C64::new(((k * 37) % 101) as f64 / 101.0 - 0.5, ((k * 53) % 97) as f64 / 97.0 - 0.5)
    })
}

fn random_state(d: usize, seed: usize) -> HierarchyState {
    HierarchyState {
        t: 0.0,
        rho00: pseudo_random(d, seed),
        rho01: pseudo_random(d, seed + 1),
        rho10: pseudo_random(d, seed + 2),
        rho11: pseudo_random(d, seed + 3),
    }
}

#[test]
fn derivative_is_linear_in_the_state() {
    let m = common::small_model(0.8, 0.002);
    let p = make_gaussian_pulse(150.0, 450.0, 1.2).unwrap();
    let (a, b) = (C64::new(0.3, -1.1), C64::new(-0.7, 0.4));
    let s1 = random_state(16, 1);
    let s2 = random_state(16, 9);
    let comb = |x: &Operator, y: &Operator| x.mapv(|z| z * a) + y.mapv(|z| z * b);
    let mix = HierarchyState {
        t: 0.0,
        rho00: comb(&s1.rho00, &s2.rho00),
        rho01: comb(&s1.rho01, &s2.rho01),
        rho10: comb(&s1.rho10, &s2.rho10),
        rho11: comb(&s1.rho11, &s2.rho11),
    };
    let t = 420.0;
    let f1 = hierarchy_derivative(&m, &p, &s1, t).unwrap();
    let f2 = hierarchy_derivative(&m, &p, &s2, t).unwrap();
    let fm = hierarchy_derivative(&m, &p, &mix, t).unwrap();
    for (x, y, z) in [
        (&f1.rho00, &f2.rho00, &fm.rho00),
        (&f1.rho01, &f2.rho01, &fm.rho01),
        (&f1.rho10, &f2.rho10, &fm.rho10),
        (&f1.rho11, &f2.rho11, &fm.rho11),
    ] {
        assert!(operator::max_abs_diff(&comb(x, y), z) < 1e-12);
    }
}

#[test]
fn explicit_sample_times_match_stride_sampling() {
    let m = common::small_model(1.0, 0.0);
    let p = common::small_pulse(&m);
    let policy = StepPolicy::Etd { h: 0.4 };
    let a = evolve(&m, &p, &EvolveOptions::new(800.0, policy).sample_every(40.0)).unwrap();
    let mut opts = EvolveOptions::new(800.0, policy);
    opts.sampling = Sampling::Times(a.series.times.clone());
    let b = evolve(&m, &p, &opts).unwrap();
    assert!(a.series.max_abs_diff(&b.series) < 1e-12);
    // Off-grid times are interpolated by a partial step.
    opts.sampling = Sampling::Times(vec![100.1, 400.33]);
    let c = evolve(&m, &p, &opts).unwrap();
    assert_eq!(c.series.times, vec![100.1, 400.33]);
    let _ = init_hierarchy(&m);
}
