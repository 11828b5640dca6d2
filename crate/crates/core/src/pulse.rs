//! Single-photon mode functions in the time domain.
//!
//! Time convention: a carrier `omega_in` shows up as `exp(-i omega_in t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PulseShape {
    /// `exp(-((t - t0)/T)^2)` for `t >= 0`.
    Gaussian { duration: f64, t0: f64 },
    /// `exp(-kappa_s t / 2)` for `t >= 0`, the emission of a decaying cavity.
    Exponential { kappa_s: f64 },
    /// No photon at all.
    Vacuum,
}

/// Normalized single-photon mode `xi(t) = norm * envelope(t) * exp(-i omega_in t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub omega_in: f64,
    pub norm: f64,
}

const QUADRATURE_INTERVALS: usize = 40_000;

/// Composite Simpson rule on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Factor that makes the clipped Gaussian square-normalized on `[0, inf)`.
pub fn gaussian_norm(duration: f64, t0: f64) -> f64 {
    let shape = |t: f64| (-2.0 * ((t - t0) / duration).powi(2)).exp();
    let integral = simpson(shape, 0.0, t0 + 8.0 * duration, QUADRATURE_INTERVALS);
    integral.sqrt().recip()
}

pub fn make_gaussian_pulse(duration: f64, t0: f64, omega_in: f64) -> Result<PulseSpec> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!("pulse duration must be positive, got {duration}")));
    }
    if !(t0 >= 3.0 * duration) {
        return Err(Error::InvalidParameter(format!(
            "t0 = {t0} is below 3T = {}; the clipped tail would distort normalization",
            3.0 * duration
        )));
    }
    Ok(PulseSpec { shape: PulseShape::Gaussian { duration, t0 }, omega_in, norm: gaussian_norm(duration, t0) })
}

pub fn make_exponential_pulse(kappa_s: f64, omega_in: f64) -> Result<PulseSpec> {
    if !(kappa_s > 0.0 && kappa_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa_s must be positive, got {kappa_s}")));
    }
    Ok(PulseSpec { shape: PulseShape::Exponential { kappa_s }, omega_in, norm: kappa_s.sqrt() })
}

pub fn vacuum(omega_in: f64) -> PulseSpec {
    PulseSpec { shape: PulseShape::Vacuum, omega_in, norm: 0.0 }
}

impl PulseSpec {
    /// `|xi(t)|`, zero before `t = 0`.
    pub fn envelope(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.shape {
            PulseShape::Gaussian { duration, t0 } => self.norm * (-((t - t0) / duration).powi(2)).exp(),
            PulseShape::Exponential { kappa_s } => self.norm * (-0.5 * kappa_s * t).exp(),
            PulseShape::Vacuum => 0.0,
        }
    }

    pub fn xi(&self, t: f64) -> C64 {
        C64::from_polar(self.envelope(t), -self.omega_in * t)
    }

    /// Characteristic duration: `T` for the Gaussian, `1/kappa_s` for the
    /// exponential.
    pub fn time_scale(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { duration, .. } => duration,
            PulseShape::Exponential { kappa_s } => kappa_s.recip(),
            PulseShape::Vacuum => 1.0,
        }
    }

    /// Time of the envelope maximum.
    pub fn peak_time(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { t0, .. } => t0,
            _ => 0.0,
        }
    }

    /// Suggested end of a run: the pulse has passed and the cavities drained.
    pub fn default_t_end(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { duration, t0 } => t0 + 4.0 * duration,
            PulseShape::Exponential { kappa_s } => 8.0 / kappa_s,
            PulseShape::Vacuum => 1.0,
        }
    }

    /// `int_0^t_end |xi|^2 dt` by Simpson quadrature.
    pub fn captured_norm(&self, t_end: f64) -> f64 {
        simpson(|t| self.envelope(t).powi(2), 0.0, t_end, QUADRATURE_INTERVALS)
    }
}

/// `(omega4 + omega5 - 2 omega0) / 2`
pub fn carrier_from_spectrum(omega0: f64, omega4: f64, omega5: f64) -> Result<f64> {
    if !(omega0 <= omega4 && omega4 <= omega5) {
        return Err(Error::InvalidParameter(format!(
            "expected omega0 <= omega4 <= omega5, got {omega0}, {omega4}, {omega5}"
        )));
    }
    Ok((omega4 + omega5 - 2.0 * omega0) / 2.0)
}
