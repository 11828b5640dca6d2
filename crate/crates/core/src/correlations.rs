//! Joint qubit excitation correlation
//! `C(t) = <S2^dag(t - tau) S1^dag(t) S1(t) S2(t - tau)>`,
//! with the downstream operators in the advanced frame and `tau = d/c`.

use crate::composite::CompositeModel;
use crate::error::{Error, Result};
use crate::hierarchy::{evolve, expect_flat, EvolveOptions, HierarchyState, Observable, Propagator, Sampling, TimeSeries};
use crate::integrate::{advance, SplitSystem, StepPolicy, Stepper};
use crate::kernel::Scratch;
use crate::operator::{self, Operator, C64, ZERO};
use crate::pulse::PulseSpec;

/// Imaginary residue tolerated in a correlation value.
const IMAG_TOL: f64 = 1e-10;

/// `Re trace(S1^dag S1 S2 rho11 S2^dag)`.
pub fn equal_time_c(model: &CompositeModel, state: &HierarchyState) -> Result<f64> {
    let v = operator::expect(&model.correlation_operator(), &state.rho11)?;
    if v.im.abs() > IMAG_TOL {
        return Err(Error::InvariantBreach { t: state.t, what: "imaginary part of C".into(), value: v.im });
    }
    Ok(v.re)
}

/// How the delayed correlation is propagated through the delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegressionMethod {
    /// Propagate `S1^dag S1` backwards with the adjoint generator once, then
    /// read every `C(t)` off a single forward sweep. Valid because the
    /// sandwiched `rho00`, `rho01`, `rho10` vanish identically (`S2` kills the
    /// ground state), which leaves a source-free equation for the sandwiched
    /// `rho11`.
    Adjoint { step: f64 },
    /// Sandwich all four hierarchy components at `s = t - tau` and propagate
    /// them with the full source terms, restarting from checkpoints spaced
    /// `checkpoint_stride` apart.
    ForwardSandwich { checkpoint_stride: f64 },
}

impl Default for RegressionMethod {
    fn default() -> Self {
        RegressionMethod::Adjoint { step: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationRequest {
    /// Delay `d/c`.
    pub tau_d: f64,
    /// Ascending target times.
    pub t_grid: Vec<f64>,
    pub method: RegressionMethod,
}

#[derive(Clone, Debug)]
pub struct CorrelationSeries {
    /// Channel `"C"` on `t_grid`.
    pub series: TimeSeries,
    /// Indices of targets with `t < tau_d`, recorded as zero.
    pub skipped: Vec<usize>,
}

/// `points` samples spanning `[t0 - T, t0 + 4T + tau_d]`.
pub fn default_t_grid(pulse: &PulseSpec, tau_d: f64, points: usize) -> Vec<f64> {
    let t0 = pulse.peak_time();
    let width = pulse.time_scale();
    let a = (t0 - width).max(tau_d);
    let b = t0 + 4.0 * width + tau_d;
    linspace(a, b, points)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Maximum of the `"C"` channel.
pub fn c_max(series: &TimeSeries) -> f64 {
    series.max("C")
}

struct AdjointRhs<'a> {
    model: &'a CompositeModel,
    linear: Vec<C64>,
    scratch: Scratch,
}

impl SplitSystem for AdjointRhs<'_> {
    fn linear(&self) -> &[C64] {
        &self.linear
    }

    fn nonlinear(&mut self, _t: f64, u: &[C64], out: &mut [C64]) {
        self.model.kernel().apply_adjoint(u, out, &mut self.scratch);
        for ((o, c), x) in out.iter_mut().zip(&self.linear).zip(u) {
            *o -= c * x;
        }
    }
}

/// `exp(L^dag tau) op`, the Heisenberg-picture evolution of `op` over `tau`.
pub fn heisenberg_propagate(model: &CompositeModel, op: &Operator, tau: f64, step: f64) -> Result<Operator> {
    let d = model.dim;
    if op.dim() != (d, d) {
        return Err(Error::Dimension(format!("operator is {:?}, model dimension is {d}", op.dim())));
    }
    if !(step > 0.0) || tau < 0.0 {
        return Err(Error::InvalidParameter(format!("need step > 0 and tau >= 0, got {step} and {tau}")));
    }
    let linear: Vec<C64> = model.generator_diagonal().iter().map(|c| c.conj()).collect();
    let mut rhs = AdjointRhs { model, scratch: Scratch::new(d), linear };
    let mut stepper = Stepper::new(StepPolicy::Etd { h: step }, &rhs.linear);
    let mut u: Vec<C64> = op.iter().copied().collect();
    advance(&mut stepper, &mut rhs, &mut u, 0.0, tau);
    Ok(Operator::from_shape_vec((d, d), u).expect("square buffer"))
}

/// `W(tau) = S2^dag exp(L^dag tau)(S1^dag S1) S2`, so that
/// `C(s + tau) = Re trace(W(tau) rho11(s))`.
pub fn regression_operator(model: &CompositeModel, tau: f64, step: f64) -> Result<Operator> {
    let q = heisenberg_propagate(model, &model.observables["S1dagS1"], tau, step)?;
    let s2 = &model.observables["S2"];
    Ok(operator::dagger(s2).dot(&q).dot(s2))
}

/// Delayed correlation on `req.t_grid`.
pub fn delayed_c(
    model: &CompositeModel,
    pulse: &PulseSpec,
    policy: StepPolicy,
    req: &CorrelationRequest,
) -> Result<CorrelationSeries> {
    if req.tau_d < 0.0 {
        return Err(Error::InvalidParameter(format!("tau_d must be nonnegative, got {}", req.tau_d)));
    }
    if req.t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("t_grid must be ascending".into()));
    }
    let mut skipped = Vec::new();
    let mut targets = Vec::new();
    for (k, &t) in req.t_grid.iter().enumerate() {
        if t < req.tau_d {
            log::warn!("C({t}) skipped: earlier than the delay {}", req.tau_d);
            skipped.push(k);
        } else {
            targets.push((k, t - req.tau_d));
        }
    }
    let mut values = vec![0.0; req.t_grid.len()];
    if !targets.is_empty() {
        let computed = match req.method {
            RegressionMethod::Adjoint { step } => adjoint_values(model, pulse, policy, req.tau_d, step, &targets)?,
            RegressionMethod::ForwardSandwich { checkpoint_stride } => {
                sandwich_values(model, pulse, policy, req.tau_d, checkpoint_stride, &targets)?
            }
        };
        for ((k, _), v) in targets.iter().zip(computed) {
            values[*k] = v;
        }
    }
    let mut series = TimeSeries::new(&["C"]);
    series.times = req.t_grid.clone();
    series.channels.insert("C".into(), values);
    Ok(CorrelationSeries { series, skipped })
}

fn checked_real(v: C64, t: f64) -> Result<f64> {
    if v.im.abs() > IMAG_TOL {
        return Err(Error::InvariantBreach { t, what: "imaginary part of C".into(), value: v.im });
    }
    Ok(v.re)
}

fn adjoint_values(
    model: &CompositeModel,
    pulse: &PulseSpec,
    policy: StepPolicy,
    tau: f64,
    step: f64,
    targets: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let w = regression_operator(model, tau, step)?;
    let times: Vec<f64> = targets.iter().map(|&(_, s)| s).collect();
    let t_end = times.last().copied().unwrap_or(0.0).max(policy.step_size());
    let mut opts = EvolveOptions::new(t_end, policy);
    opts.sampling = Sampling::Times(times.clone());
    opts.record = vec![Observable::Custom { name: "W".into(), op: w.clone() }];
    // A Hermitian W against the Hermitian rho11 leaves no imaginary residue.
    let sym = operator::asymmetry(&w);
    if sym > IMAG_TOL {
        return Err(Error::InvariantBreach { t: tau, what: "non-Hermitian regression operator".into(), value: sym });
    }
    let ev = evolve(model, pulse, &opts)?;
    Ok(ev.series.get("W").expect("recorded channel").to_vec())
}

fn sandwich_values(
    model: &CompositeModel,
    pulse: &PulseSpec,
    policy: StepPolicy,
    tau: f64,
    checkpoint_stride: f64,
    targets: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let h = policy.step_size();
    let stride = (checkpoint_stride / h).round().max(1.0) * h;
    let mut main = Propagator::new(model, pulse, policy);
    let d = model.dim;
    let n = d * d;
    let s2 = model.s2_terms();
    let obs = &model.observables["S1dagS1"];
    let mut scratch = Scratch::new(d);
    let mut out = Vec::with_capacity(targets.len());
    for &(_, s) in targets {
        let checkpoint = (s / stride * (1.0 + 1e-12)).floor() * stride;
        main.advance_grid(checkpoint)?;
        let mut branch = Propagator::new(model, pulse, policy);
        branch.set_raw(main.raw().to_vec(), main.t());
        branch.advance_to(s)?;
        let u = branch.raw();
        let mut lam = vec![ZERO; 4 * n];
        for k in 0..4 {
            model.kernel().sandwich(s2, &u[k * n..(k + 1) * n], &mut lam[k * n..(k + 1) * n], &mut scratch);
        }
        branch.set_raw(lam, s);
        branch.advance_to(s + tau)?;
        let lam11 = &branch.raw()[3 * n..];
        out.push(checked_real(expect_flat(obs, lam11), s + tau)?);
    }
    Ok(out)
}
