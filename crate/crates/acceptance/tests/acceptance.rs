//! Full-scale acceptance runs. Slow: the shared baseline alone is several
//! minutes on one core.

use std::io::Write;

use usc_cascade_acceptance::*;

// Written to the stderr handle directly so the verdict shows up even when the
// test harness captures output.
fn report(v: Verdict) {
    let _ = writeln!(std::io::stderr(), "{}", v.line());
    assert!(v.passed, "{}", v.line());
}

#[test]
fn criterion_1_spectrum_structure() {
    report(criterion_1());
}

#[test]
fn criterion_2_joint_excitation() {
    report(criterion_2());
}

#[test]
fn criterion_3_delay_damping() {
    report(criterion_3());
}

#[test]
fn criterion_4_gain_linearity() {
    report(criterion_4());
}

#[test]
fn criterion_5_qubit_decay() {
    report(criterion_5());
}

#[test]
fn criterion_6_detuning() {
    report(criterion_6());
}

#[test]
fn criterion_7_oracle() {
    report(criterion_7());
}

#[test]
fn criterion_8_invariants() {
    report(criterion_8());
}

#[test]
fn criterion_9_limits() {
    report(criterion_9());
}
