#![allow(dead_code)]

use std::f64::consts::PI;

use usc_cascade::composite::{assemble, CascadeParams, CompositeModel};
use usc_cascade::pulse::{carrier_from_spectrum, make_gaussian_pulse, PulseSpec};
use usc_cascade::subsystem::{dress, SubsystemSpec};

/// Reduced model: 4 kept levels per subsystem (dim 16), rates scaled up so
/// that a pulse of width 150 does the same job as 1500 at full size.
pub fn small_model(gain: f64, gamma: f64) -> CompositeModel {
    let d = dress(&SubsystemSpec::new(1.18, 0.5, PI / 5.0).with_truncation(20, 4)).unwrap();
    assemble(&d, &d, &CascadeParams::new(0.04, 0.01).with_gain(gain).with_gamma(gamma)).unwrap()
}

pub fn small_carrier(model: &CompositeModel) -> f64 {
    let e = model.energies().unwrap();
    carrier_from_spectrum(e[0], e[4], e[5]).unwrap()
}

pub fn small_pulse(model: &CompositeModel) -> PulseSpec {
    make_gaussian_pulse(150.0, 450.0, small_carrier(model)).unwrap()
}
