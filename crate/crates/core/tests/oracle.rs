mod common;

use usc_cascade::oracle::{build_source_model, cross_validate};
use usc_cascade::subsystem::{dress, SubsystemSpec};
use usc_cascade::composite::{assemble, CascadeParams};

#[test]
fn lone_source_decays_exponentially() {
    // Uncoupled subsystems with vanishing rates leave the source on its own.
    let d = dress(&SubsystemSpec::new(1.3, 0.0, 0.0).with_truncation(4, 2)).unwrap();
    let m = assemble(&d, &d, &CascadeParams::new(1e-300, 1e-300)).unwrap();
    let ks = 0.01;
    let src = build_source_model(&m, ks, 1.3).unwrap();
    let s = src.evolve(400.0, 0.5, 5.0).unwrap();
    let n = s.get("source_number").unwrap();
    let tr = s.get("trace").unwrap();
    for (k, &t) in s.times.iter().enumerate() {
        assert!((n[k] - (-ks * t).exp()).abs() < 1e-10, "t = {t}: {}", n[k]);
        assert!((tr[k] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn source_model_conserves_trace() {
    let m = common::small_model(1.0, 0.003);
    let src = build_source_model(&m, 0.02, common::small_carrier(&m)).unwrap();
    let s = src.evolve(300.0, 0.4, 10.0).unwrap();
    assert!(s.get("trace").unwrap().iter().all(|t| (t - 1.0).abs() < 1e-10));
}

#[test]
fn hierarchy_matches_source_cavity_model() {
    let m = common::small_model(1.0, 0.0);
    let w = common::small_carrier(&m);
    for ks in [0.02, 0.04] {
        let report = cross_validate(&m, ks, w, &["S1dagS1", "S2dagS2", "C"], 8.0 / ks).unwrap();
        for r in &report.rows {
            assert!(r.oracle_peak > 1e-6, "{r:?}");
        }
        assert!(report.passes(1e-3), "{report:?}");
    }
}

#[test]
fn partial_gain_and_qubit_decay_also_match() {
    let m = common::small_model(0.6, 0.005);
    let report = cross_validate(&m, 0.03, common::small_carrier(&m), &["S1dagS1", "S2dagS2", "C"], 300.0).unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}
