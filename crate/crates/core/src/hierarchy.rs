//! Coupled master equations for the four components `rho_ab`, `a, b in {0, 1}`,
//! of a system driven by a single-photon wavepacket.
//!
//! Internally the off-diagonal components are carried in frames rotating with
//! the carrier, `X = exp(-i w t) rho01` and `Y = exp(+i w t) rho10`, which
//! leaves only slow envelopes in the source terms.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::composite::{liouvillian_apply, CompositeModel};
use crate::error::{Error, Result};
use crate::integrate::{advance, SplitSystem, StepPolicy, Stepper};
use crate::kernel::Scratch;
use crate::operator::{self, Operator, C64, I, ONE, ZERO};
use crate::pulse::PulseSpec;

/// The four hierarchy components at time `t`, in the lab frame.
#[derive(Clone, Debug)]
pub struct HierarchyState {
    pub t: f64,
    pub rho00: Operator,
    pub rho01: Operator,
    pub rho10: Operator,
    pub rho11: Operator,
}

/// `rho00 = rho11 = |0><0|`, `rho01 = rho10 = 0`.
pub fn init_hierarchy(model: &CompositeModel) -> HierarchyState {
    let g = model.ground_projector();
    let z = Operator::zeros((model.dim, model.dim));
    HierarchyState { t: 0.0, rho00: g.clone(), rho01: z.clone(), rho10: z, rho11: g }
}

/// Right-hand side of the hierarchy at time `t`, evaluated directly in the lab
/// frame.
pub fn hierarchy_derivative(
    model: &CompositeModel,
    pulse: &PulseSpec,
    state: &HierarchyState,
    t: f64,
) -> Result<HierarchyState> {
    let xi = pulse.xi(t);
    let l0 = model.l0();
    let l0d = operator::dagger(l0);
    let sc = |op: Operator, c: C64| op.mapv(|z| z * c);
    let d00 = liouvillian_apply(model, &state.rho00)?;
    let d01 = liouvillian_apply(model, &state.rho01)? + sc(operator::commutator(l0, &state.rho00), xi.conj());
    let d10 = liouvillian_apply(model, &state.rho10)? + sc(operator::commutator(&state.rho00, &l0d), xi);
    let d11 = liouvillian_apply(model, &state.rho11)?
        + sc(operator::commutator(&state.rho01, &l0d), xi)
        + sc(operator::commutator(l0, &state.rho10), xi.conj());
    Ok(HierarchyState { t, rho00: d00, rho01: d01, rho10: d10, rho11: d11 })
}

fn flatten(op: &Operator) -> impl Iterator<Item = C64> + '_ {
    op.iter().copied()
}

fn to_operator(d: usize, data: &[C64]) -> Operator {
    Operator::from_shape_vec((d, d), data.to_vec()).expect("square buffer")
}

/// Rotated-frame state vector `[rho00, X, Y, rho11]`.
pub(crate) fn pack(state: &HierarchyState, omega_in: f64) -> Vec<C64> {
    let rot = C64::from_polar(1.0, -omega_in * state.t);
    let mut u = Vec::with_capacity(4 * state.rho00.len());
    u.extend(flatten(&state.rho00));
    u.extend(flatten(&state.rho01).map(|z| z * rot));
    u.extend(flatten(&state.rho10).map(|z| z * rot.conj()));
    u.extend(flatten(&state.rho11));
    u
}

pub(crate) fn unpack(u: &[C64], d: usize, t: f64, omega_in: f64) -> HierarchyState {
    let n = d * d;
    let back = C64::from_polar(1.0, omega_in * t);
    let x: Vec<C64> = u[n..2 * n].iter().map(|z| z * back).collect();
    let y: Vec<C64> = u[2 * n..3 * n].iter().map(|z| z * back.conj()).collect();
    HierarchyState {
        t,
        rho00: to_operator(d, &u[..n]),
        rho01: to_operator(d, &x),
        rho10: to_operator(d, &y),
        rho11: to_operator(d, &u[3 * n..]),
    }
}

/// Rotated-frame hierarchy as a split system for the integrators.
pub(crate) struct HierarchyRhs<'a> {
    model: &'a CompositeModel,
    pulse: PulseSpec,
    c0: Vec<C64>,
    linear: Vec<C64>,
    scratch: Scratch,
}

impl<'a> HierarchyRhs<'a> {
    pub(crate) fn new(model: &'a CompositeModel, pulse: &PulseSpec) -> Self {
        let c0 = model.generator_diagonal();
        let w = I * pulse.omega_in;
        let mut linear = Vec::with_capacity(4 * c0.len());
        linear.extend(c0.iter().copied());
        linear.extend(c0.iter().map(|c| c - w));
        linear.extend(c0.iter().map(|c| c + w));
        linear.extend(c0.iter().copied());
        Self { model, pulse: *pulse, c0, linear, scratch: Scratch::new(model.dim) }
    }
}

impl SplitSystem for HierarchyRhs<'_> {
    fn linear(&self) -> &[C64] {
        &self.linear
    }

    fn nonlinear(&mut self, t: f64, u: &[C64], out: &mut [C64]) {
        let kernel = self.model.kernel();
        let n = self.c0.len();
        for k in 0..4 {
            let (src, dst) = (&u[k * n..(k + 1) * n], &mut out[k * n..(k + 1) * n]);
            kernel.apply(src, dst, &mut self.scratch);
            for ((o, c), x) in dst.iter_mut().zip(&self.c0).zip(src) {
                *o -= c * x;
            }
        }
        let env = self.pulse.envelope(t);
        if env == 0.0 {
            return;
        }
        let env = C64::new(env, 0.0);
        let (l0, l0d) = self.model.l0_terms();
        let (r00, rest) = u.split_at(n);
        let (x, rest) = rest.split_at(n);
        let (y, _) = rest.split_at(n);
        let (_, out_rest) = out.split_at_mut(n);
        let (out_x, out_rest) = out_rest.split_at_mut(n);
        let (out_y, out_11) = out_rest.split_at_mut(n);
        let s = &mut self.scratch;
        // X' gets env [L0, rho00]; Y' gets env [rho00, L0^dag];
        // rho11' gets env [X, L0^dag] + env [L0, Y].
        kernel.commutator_add(l0, l0d, r00, env, out_x, s);
        kernel.commutator_add(l0d, l0, r00, -env, out_y, s);
        kernel.commutator_add(l0d, l0, x, -env, out_11, s);
        kernel.commutator_add(l0, l0d, y, env, out_11, s);
    }
}

/// Quantities that can be recorded along a trajectory.
#[derive(Clone, Debug)]
pub enum Observable {
    S1dagS1,
    S2dagS2,
    A1dagA1,
    A2dagA2,
    /// `<S2^dag S1^dag S1 S2>` on the physical state.
    EqualTimeC,
    /// `|xi(t)|`
    PulseEnvelope,
    /// Real part of `trace(op rho11)`.
    Custom { name: String, op: Operator },
}

impl Observable {
    pub fn name(&self) -> &str {
        match self {
            Observable::S1dagS1 => "S1dagS1",
            Observable::S2dagS2 => "S2dagS2",
            Observable::A1dagA1 => "A1dagA1",
            Observable::A2dagA2 => "A2dagA2",
            Observable::EqualTimeC => "C",
            Observable::PulseEnvelope => "pulse_envelope",
            Observable::Custom { name, .. } => name,
        }
    }

    /// The standard recording set.
    pub fn standard() -> Vec<Observable> {
        vec![Observable::S1dagS1, Observable::S2dagS2, Observable::EqualTimeC, Observable::PulseEnvelope]
    }

    fn operator(&self, model: &CompositeModel) -> Option<Operator> {
        let number = |name: &str| {
            let a = &model.observables[name];
            operator::dagger(a).dot(a)
        };
        match self {
            Observable::S1dagS1 => Some(model.observables["S1dagS1"].clone()),
            Observable::S2dagS2 => Some(model.observables["S2dagS2"].clone()),
            Observable::A1dagA1 => Some(number("A1")),
            Observable::A2dagA2 => Some(number("A2")),
            Observable::EqualTimeC => Some(model.correlation_operator()),
            Observable::PulseEnvelope => None,
            Observable::Custom { op, .. } => Some(op.clone()),
        }
    }
}

/// Sampled real-valued channels on a shared time axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub channels: BTreeMap<String, Vec<f64>>,
}

impl TimeSeries {
    pub fn new(names: &[&str]) -> Self {
        Self { times: Vec::new(), channels: names.iter().map(|n| (n.to_string(), Vec::new())).collect() }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Maximum of a channel; `0` for a missing or empty channel.
    pub fn max(&self, name: &str) -> f64 {
        self.get(name).and_then(|v| v.iter().copied().reduce(f64::max)).unwrap_or(0.0)
    }

    /// Time at which a channel peaks.
    pub fn argmax_time(&self, name: &str) -> Option<f64> {
        let v = self.get(name)?;
        let (k, _) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        Some(self.times[k])
    }

    /// Largest absolute difference between matching channels of two series on
    /// the same time grid.
    pub fn max_abs_diff(&self, other: &TimeSeries) -> f64 {
        let mut worst = 0.0f64;
        for (name, a) in &self.channels {
            if let Some(b) = other.get(name) {
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}

/// Tolerances checked at every recorded sample.
pub mod tolerance {
    pub const TRACE: f64 = 1e-8;
    pub const HERMITICITY: f64 = 1e-10;
    pub const POSITIVITY: f64 = -1e-6;
    pub const RESYMMETRIZATION: f64 = 1e-9;
}

/// Worst values of the state invariants seen along a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantReport {
    pub samples: usize,
    /// Largest `|trace - 1|` of rho00, rho11 and `|trace|` of rho01, rho10.
    pub trace_error: f64,
    /// Largest elementwise anti-Hermitian part of rho00, rho11.
    pub hermiticity_error: f64,
    /// Largest elementwise `|rho10 - rho01^dag|`.
    pub pairing_error: f64,
    /// Smallest eigenvalue of rho11.
    pub min_eigenvalue: f64,
    /// Largest correction applied by periodic re-symmetrization.
    pub max_resymmetrization: f64,
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self {
            samples: 0,
            trace_error: 0.0,
            hermiticity_error: 0.0,
            pairing_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_resymmetrization: 0.0,
        }
    }
}

impl InvariantReport {
    fn check(&mut self, u: &[C64], d: usize, t: f64) -> Result<()> {
        let n = d * d;
        let trace = |m: &[C64]| (0..d).map(|i| m[i * d + i]).sum::<C64>();
        let herm = |m: &[C64]| {
            let mut w = 0.0f64;
            for i in 0..d {
                for j in i..d {
                    w = w.max((m[i * d + j] - m[j * d + i].conj()).norm());
                }
            }
            w
        };
        let (r00, x, y, r11) = (&u[..n], &u[n..2 * n], &u[2 * n..3 * n], &u[3 * n..]);
        let breach = |what: &str, value: f64| Err(Error::InvariantBreach { t, what: what.into(), value });

        let traces = [(trace(r00) - ONE).norm(), (trace(r11) - ONE).norm(), trace(x).norm(), trace(y).norm()];
        let tr = traces.iter().copied().fold(0.0, f64::max);
        self.trace_error = self.trace_error.max(tr);
        if tr > tolerance::TRACE {
            return breach("trace error", tr);
        }
        let he = herm(r00).max(herm(r11));
        self.hermiticity_error = self.hermiticity_error.max(he);
        if he > tolerance::HERMITICITY {
            return breach("hermiticity error of rho00/rho11", he);
        }
        let mut pe = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                pe = pe.max((y[i * d + j] - x[j * d + i].conj()).norm());
            }
        }
        self.pairing_error = self.pairing_error.max(pe);
        if pe > tolerance::HERMITICITY {
            return breach("|rho10 - rho01^dag|", pe);
        }
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (r11[i * d + j] + r11[j * d + i].conj()));
        let lo = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        self.min_eigenvalue = self.min_eigenvalue.min(lo);
        if lo < tolerance::POSITIVITY {
            return breach("min eigenvalue of rho11", lo);
        }
        self.samples += 1;
        Ok(())
    }
}

/// Steps between re-symmetrizations of rho00 and rho11.
const RESYMMETRIZE_EVERY: u64 = 1000;

/// Time-stepping driver for the hierarchy.
pub struct Propagator<'a> {
    rhs: HierarchyRhs<'a>,
    stepper: Stepper,
    u: Vec<C64>,
    t: f64,
    steps: u64,
    max_resymmetrization: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(model: &'a CompositeModel, pulse: &PulseSpec, policy: StepPolicy) -> Self {
        Self::with_state(model, pulse, policy, &init_hierarchy(model))
    }

    pub fn with_state(model: &'a CompositeModel, pulse: &PulseSpec, policy: StepPolicy, state: &HierarchyState) -> Self {
        let rhs = HierarchyRhs::new(model, pulse);
        let stepper = Stepper::new(policy, &rhs.linear);
        Self { u: pack(state, pulse.omega_in), t: state.t, rhs, stepper, steps: 0, max_resymmetrization: 0.0 }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn h(&self) -> f64 {
        self.stepper.h()
    }

    fn dim(&self) -> usize {
        self.rhs.model.dim
    }

    /// Physical state `rho11`, flattened row-major.
    pub fn rho11(&self) -> &[C64] {
        let n = self.dim() * self.dim();
        &self.u[3 * n..]
    }

    pub fn state(&self) -> HierarchyState {
        unpack(&self.u, self.dim(), self.t, self.rhs.pulse.omega_in)
    }

    pub fn max_resymmetrization(&self) -> f64 {
        self.max_resymmetrization
    }

    fn resymmetrize(&mut self) -> Result<()> {
        let d = self.dim();
        let n = d * d;
        for block in [0, 3] {
            let m = &mut self.u[block * n..(block + 1) * n];
            let mut worst = 0.0f64;
            for i in 0..d {
                for j in i..d {
                    let avg = 0.5 * (m[i * d + j] + m[j * d + i].conj());
                    worst = worst.max((m[i * d + j] - avg).norm());
                    m[i * d + j] = avg;
                    m[j * d + i] = avg.conj();
                }
            }
            log::debug!("t = {:.3}: re-symmetrized block {block}, correction {worst:.3e}", self.t);
            self.max_resymmetrization = self.max_resymmetrization.max(worst);
            if worst > tolerance::RESYMMETRIZATION {
                return Err(Error::InvariantBreach { t: self.t, what: "re-symmetrization correction".into(), value: worst });
            }
        }
        Ok(())
    }

    /// One full step.
    pub fn step(&mut self) -> Result<()> {
        self.stepper.step(&mut self.rhs, self.t, &mut self.u);
        self.steps += 1;
        self.t += self.stepper.h();
        if self.steps % RESYMMETRIZE_EVERY == 0 {
            self.resymmetrize()?;
        }
        Ok(())
    }

    /// Full steps while they fit before `t`; the state stays on the step grid.
    pub fn advance_grid(&mut self, t: f64) -> Result<()> {
        let h = self.stepper.h();
        while t - self.t >= h * (1.0 - 1e-9) {
            self.step()?;
        }
        Ok(())
    }

    /// Advance exactly to `t`, finishing with a short step if needed.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        self.advance_grid(t)?;
        if t > self.t {
            self.t = advance(&mut self.stepper, &mut self.rhs, &mut self.u, self.t, t);
        }
        Ok(())
    }

    /// Rotated-frame state vector at a time `t >= self.t()` without moving
    /// this propagator.
    pub fn peek(&mut self, t: f64) -> Vec<C64> {
        let mut u = self.u.clone();
        if t > self.t {
            let mut short = self.stepper.resized(&self.rhs.linear, self.stepper.h());
            advance(&mut short, &mut self.rhs, &mut u, self.t, t);
        }
        u
    }

    pub(crate) fn raw(&self) -> &[C64] {
        &self.u
    }

    pub(crate) fn set_raw(&mut self, u: Vec<C64>, t: f64) {
        self.u = u;
        self.t = t;
    }
}

/// When to record samples.
#[derive(Clone, Debug, PartialEq)]
pub enum Sampling {
    /// Every `n` full steps, plus the final time.
    Stride(usize),
    /// At the given ascending times.
    Times(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub policy: StepPolicy,
    pub record: Vec<Observable>,
    pub sampling: Sampling,
    pub check_invariants: bool,
}

impl EvolveOptions {
    pub fn new(t_end: f64, policy: StepPolicy) -> Self {
        Self { t_end, policy, record: Observable::standard(), sampling: Sampling::Stride(1), check_invariants: true }
    }

    /// Sample roughly every `every` time units.
    pub fn sample_every(mut self, every: f64) -> Self {
        let stride = (every / self.policy.step_size()).round().max(1.0) as usize;
        self.sampling = Sampling::Stride(stride);
        self
    }

    pub fn record(mut self, record: Vec<Observable>) -> Self {
        self.record = record;
        self
    }
}

/// Result of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub series: TimeSeries,
    pub state: HierarchyState,
    pub invariants: InvariantReport,
}

/// `ETD` step used when none is configured: `min(4, T/375)`.
pub fn default_policy(pulse: &PulseSpec) -> StepPolicy {
    StepPolicy::Etd { h: (pulse.time_scale() / 375.0).min(4.0) }
}

/// Classic RK4 step `min(0.02 / w_span, T / 2000)`, where `w_span` is the
/// spread of composite eigenvalues plus the carrier.
pub fn rk4_policy(model: &CompositeModel, pulse: &PulseSpec) -> Result<StepPolicy> {
    let e = model.energies()?;
    let span = e[e.len() - 1] - e[0] + pulse.omega_in.abs();
    Ok(StepPolicy::Rk4 { dt: (0.02 / span).min(pulse.time_scale() / 2000.0) })
}

fn sample_times(opts: &EvolveOptions, h: f64) -> Vec<f64> {
    match &opts.sampling {
        Sampling::Times(ts) => ts.iter().copied().filter(|&t| t <= opts.t_end).collect(),
        Sampling::Stride(k) => {
            let every = h * (*k).max(1) as f64;
            let n = (opts.t_end / every * (1.0 + 1e-12)).floor() as usize;
            let mut ts: Vec<f64> = (0..=n).map(|i| i as f64 * every).collect();
            if opts.t_end - ts[ts.len() - 1] > 1e-9 * h {
                ts.push(opts.t_end);
            }
            ts
        }
    }
}

struct Recorder {
    names: Vec<String>,
    ops: Vec<Option<Vec<C64>>>,
}

impl Recorder {
    fn new(model: &CompositeModel, record: &[Observable]) -> Self {
        let names = record.iter().map(|o| o.name().to_string()).collect();
        // Store transposes so that trace(op rho) is a plain dot product.
        let ops = record.iter().map(|o| o.operator(model).map(|op| op.t().iter().copied().collect())).collect();
        Self { names, ops }
    }

    fn record(&self, series: &mut TimeSeries, t: f64, rho11: &[C64], pulse: &PulseSpec) {
        series.times.push(t);
        for (name, op) in self.names.iter().zip(&self.ops) {
            let v = match op {
                Some(opt) => opt.iter().zip(rho11).map(|(a, b)| a * b).sum::<C64>().re,
                None => pulse.envelope(t),
            };
            series.channels.get_mut(name).expect("registered channel").push(v);
        }
    }
}

/// Integrate the hierarchy from `t = 0` and record observables of `rho11`.
pub fn evolve(model: &CompositeModel, pulse: &PulseSpec, opts: &EvolveOptions) -> Result<Evolution> {
    if !(opts.t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", opts.t_end)));
    }
    let mut prop = Propagator::new(model, pulse, opts.policy);
    let recorder = Recorder::new(model, &opts.record);
    let names: Vec<&str> = recorder.names.iter().map(String::as_str).collect();
    let mut series = TimeSeries::new(&names);
    let mut report = InvariantReport::default();
    let d = model.dim;
    let n = d * d;
    for s in sample_times(opts, prop.h()) {
        prop.advance_grid(s)?;
        let u = if s - prop.t() > 1e-9 * prop.h() { prop.peek(s) } else { prop.raw().to_vec() };
        if opts.check_invariants {
            report.check(&u, d, s)?;
        }
        recorder.record(&mut series, s, &u[3 * n..], pulse);
    }
    prop.advance_to(opts.t_end)?;
    report.max_resymmetrization = prop.max_resymmetrization();
    Ok(Evolution { series, state: prop.state(), invariants: report })
}

/// `Re trace(op rho)` for a flat row-major `rho`.
pub fn expect_flat(op: &Operator, rho: &[C64]) -> C64 {
    let d = op.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += op[[i, j]] * rho[j * d + i];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composite::{assemble, CascadeParams};
    use crate::pulse::{make_gaussian_pulse, vacuum};
    use crate::subsystem::{dress, SubsystemSpec};
    use std::f64::consts::PI;

    fn model() -> CompositeModel {
        let d = dress(&SubsystemSpec::new(1.3, 0.5, PI / 5.0).with_truncation(10, 4)).unwrap();
        assemble(&d, &d, &CascadeParams::new(0.02, 0.01).with_gamma(0.001)).unwrap()
    }

    fn random_state(m: &CompositeModel, seed: u64) -> HierarchyState {
        let d = m.dim;
        let mut x = seed;
        let mut rnd = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut gen = || Operator::from_shape_fn((d, d), |_| C64::new(rnd(), rnd()));
        let h = |a: Operator| &a + &operator::dagger(&a);
        let r01 = gen();
        HierarchyState { t: 0.3, rho00: h(gen()), rho10: operator::dagger(&r01), rho01: r01, rho11: h(gen()) }
    }

    #[test]
    fn initial_state() {
        let m = model();
        let s = init_hierarchy(&m);
        assert_eq!(operator::trace(&s.rho11), ONE);
        assert_eq!(operator::expect(&m.observables["S1dagS1"], &s.rho11).unwrap(), ZERO);
    }

    #[test]
    fn derivative_traces_vanish_and_pair_up() {
        let m = model();
        let p = make_gaussian_pulse(50.0, 150.0, 1.1).unwrap();
        let s = random_state(&m, 7);
        let d = hierarchy_derivative(&m, &p, &s, 140.0).unwrap();
        for c in [&d.rho00, &d.rho01, &d.rho10, &d.rho11] {
            assert!(operator::trace(c).norm() < 1e-12);
        }
        assert!(operator::max_abs_diff(&d.rho10, &operator::dagger(&d.rho01)) < 1e-12);
    }

    #[test]
    fn rotated_rhs_matches_lab_frame() {
        let m = model();
        let p = make_gaussian_pulse(50.0, 150.0, 1.1).unwrap();
        let s = random_state(&m, 3);
        let t = s.t;
        let lab = hierarchy_derivative(&m, &p, &s, t).unwrap();
        let mut rhs = HierarchyRhs::new(&m, &p);
        let u = pack(&s, p.omega_in);
        let mut out = vec![ZERO; u.len()];
        rhs.nonlinear(t, &u, &mut out);
        for (o, (c, x)) in out.iter_mut().zip(rhs.linear.iter().zip(&u)) {
            *o += c * x;
        }
        // d/dt X = exp(-i w t) (d rho01/dt - i w rho01)
        let n = m.dim * m.dim;
        let rot = C64::from_polar(1.0, -p.omega_in * t);
        let w = I * p.omega_in;
        let expect_x: Vec<C64> =
            lab.rho01.iter().zip(s.rho01.iter()).map(|(dr, r)| rot * (dr - w * r)).collect();
        let expect_y: Vec<C64> =
            lab.rho10.iter().zip(s.rho10.iter()).map(|(dr, r)| rot.conj() * (dr + w * r)).collect();
        let close = |a: &[C64], b: &[C64]| a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-12);
        assert!(close(&out[..n], &lab.rho00.iter().copied().collect::<Vec<_>>()));
        assert!(close(&out[n..2 * n], &expect_x));
        assert!(close(&out[2 * n..3 * n], &expect_y));
        assert!(close(&out[3 * n..], &lab.rho11.iter().copied().collect::<Vec<_>>()));
    }

    #[test]
    fn vacuum_input_stays_in_ground_state() {
        let m = model();
        let opts = EvolveOptions::new(400.0, StepPolicy::Etd { h: 2.0 }).sample_every(10.0);
        let ev = evolve(&m, &vacuum(1.1), &opts).unwrap();
        for name in ["S1dagS1", "S2dagS2", "C"] {
            assert!(ev.series.get(name).unwrap().iter().all(|v| v.abs() <= 1e-12));
        }
        assert!((ev.state.rho11[[0, 0]] - ONE).norm() < 1e-12);
    }

    #[test]
    fn sampling_hits_requested_times() {
        let m = model();
        let p = make_gaussian_pulse(20.0, 60.0, 1.1).unwrap();
        let mut opts = EvolveOptions::new(50.0, StepPolicy::Etd { h: 1.0 });
        opts.sampling = Sampling::Times(vec![0.0, 2.5, 10.0, 33.3]);
        let ev = evolve(&m, &p, &opts).unwrap();
        assert_eq!(ev.series.times, vec![0.0, 2.5, 10.0, 33.3]);
        assert!((ev.state.t - 50.0).abs() < 1e-12);
    }
}
