//! Independent check of the hierarchy: a two-level source cavity holding one
//! excitation is cascaded into subsystem 1. Its emission is exactly the
//! exponential single-photon mode, so the driven problem becomes an ordinary
//! time-independent master equation on source (x) composite.
//!
//! Everything here is assembled from the dressed subsystem data with dense
//! operator primitives; nothing is shared with the product-structured
//! generator used by the hierarchy.

use std::collections::BTreeMap;

use ndarray::ArrayView2;

use crate::composite::CompositeModel;
use crate::error::{Error, Result};
use crate::hierarchy::{default_policy, evolve, EvolveOptions, Observable, TimeSeries};
use crate::integrate::{advance, SplitSystem, StepPolicy, Stepper};
use crate::operator::{self, Operator, C64, I};
use crate::pulse::make_exponential_pulse;

/// Source cavity cascaded in front of the two subsystems.
#[derive(Clone, Debug)]
pub struct SourceModel {
    pub kappa_s: f64,
    pub omega_s: f64,
    pub dim: usize,
    pub h: Operator,
    pub lindblads: Vec<Operator>,
    /// `|1><1|` on the source times the composite ground state.
    pub initial: Operator,
    /// `S1dagS1`, `S2dagS2`, `C` and `source_number`, lifted to the full space.
    pub observables: BTreeMap<&'static str, Operator>,
}

fn sc(op: &Operator, c: C64) -> Operator {
    op.mapv(|z| z * c)
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn build_source_model(model: &CompositeModel, kappa_s: f64, omega_in: f64) -> Result<SourceModel> {
    if !(kappa_s > 0.0 && kappa_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa_s must be positive, got {kappa_s}")));
    }
    let (d1, d2, p) = (&model.sub1, &model.sub2, &model.params);
    let (n1, n2) = (d1.dim(), d2.dim());
    let lift = |src: &Operator, o1: &Operator, o2: &Operator| operator::tensor(&operator::tensor(src, o1), o2);
    let is = operator::identity(2);
    let i1 = operator::identity(n1);
    let i2 = operator::identity(n2);
    let a_s = lift(&operator::annihilation(2), &i1, &i2);
    let a1 = lift(&is, &d1.a, &i2);
    let a2 = lift(&is, &i1, &d2.a);
    let s1 = lift(&is, &d1.s, &i2);
    let s2 = lift(&is, &i1, &d2.s);
    let dag = operator::dagger;

    let mut h = sc(&dag(&a_s).dot(&a_s), re(omega_in))
        + lift(&is, &operator::real_diag(&d1.energies), &i2)
        + lift(&is, &i1, &operator::real_diag(&d2.energies));
    // Unidirectional couplings of the chain source -> 1 -> 2, each of the
    // form (i/2) sqrt(k_up k_down) (c_up^dag c_down - h.c.).
    let g = p.gain;
    let pairs = [
        (&a_s, &a1, (kappa_s * p.kappa1).sqrt()),
        (&a_s, &a2, (g * kappa_s * p.kappa2).sqrt()),
        (&a1, &a2, (g * p.kappa1 * p.kappa2).sqrt()),
    ];
    for (up, down, c) in pairs {
        let x = dag(up).dot(down);
        h = h + sc(&(&x - &dag(&x)), 0.5 * I * c);
    }
    let lindblads = vec![
        sc(&a_s, re(kappa_s.sqrt())) + sc(&a1, re(p.kappa1.sqrt())) + sc(&a2, re((g * p.kappa2).sqrt())),
        sc(&a2, re(((1.0 - g) * p.kappa2).sqrt())),
        sc(&s1, re(p.gamma1.sqrt())),
        sc(&s2, re(p.gamma2.sqrt())),
    ];
    let dim = 2 * n1 * n2;
    let mut initial = Operator::zeros((dim, dim));
    initial[[n1 * n2, n1 * n2]] = re(1.0);

    let s1ds1 = dag(&s1).dot(&s1);
    let mut observables = BTreeMap::new();
    observables.insert("C", dag(&s2).dot(&s1ds1).dot(&s2));
    observables.insert("S1dagS1", s1ds1);
    observables.insert("S2dagS2", dag(&s2).dot(&s2));
    observables.insert("source_number", dag(&a_s).dot(&a_s));
    Ok(SourceModel { kappa_s, omega_s: omega_in, dim, h, lindblads, initial, observables })
}

struct DenseLindblad {
    d: usize,
    heff: Operator,
    heff_dag: Operator,
    jumps: Vec<(Operator, Operator)>,
    linear: Vec<C64>,
}

impl DenseLindblad {
    fn new(m: &SourceModel) -> Self {
        let mut heff = m.h.clone();
        let mut jumps = Vec::new();
        for l in &m.lindblads {
            if operator::max_abs(l) == 0.0 {
                continue;
            }
            let ld = operator::dagger(l);
            heff = heff - sc(&ld.dot(l), 0.5 * I);
            jumps.push((l.clone(), ld));
        }
        let diag: Vec<C64> = heff.diag().to_vec();
        let linear = diag.iter().flat_map(|a| diag.iter().map(move |b| -I * (a - b.conj()))).collect();
        Self { d: m.dim, heff_dag: operator::dagger(&heff), heff, jumps, linear }
    }
}

impl SplitSystem for DenseLindblad {
    fn linear(&self) -> &[C64] {
        &self.linear
    }

    fn nonlinear(&mut self, _t: f64, u: &[C64], out: &mut [C64]) {
        let rho = ArrayView2::from_shape((self.d, self.d), u).expect("square state");
        let mut full = sc(&(self.heff.dot(&rho) - rho.dot(&self.heff_dag)), -I);
        for (l, ld) in &self.jumps {
            full = full + l.dot(&rho).dot(ld);
        }
        for (((o, f), c), x) in out.iter_mut().zip(full.iter()).zip(&self.linear).zip(u) {
            *o = f - c * x;
        }
    }
}

impl SourceModel {
    /// Evolve from the initial state, sampling every `sample_every`.
    pub fn evolve(&self, t_end: f64, h: f64, sample_every: f64) -> Result<TimeSeries> {
        let mut sys = DenseLindblad::new(self);
        let mut stepper = Stepper::new(StepPolicy::Etd { h }, &sys.linear);
        let mut u: Vec<C64> = self.initial.iter().copied().collect();
        let names: Vec<&str> = self.observables.keys().copied().chain(["trace"]).collect();
        let mut series = TimeSeries::new(&names);
        let stride = (sample_every / h).round().max(1.0) as usize;
        let n_steps = (t_end / h).round() as usize;
        let mut t = 0.0;
        for k in 0..=n_steps {
            if k % stride == 0 {
                let rho = ArrayView2::from_shape((self.dim, self.dim), &u[..]).expect("square state").to_owned();
                series.times.push(t);
                for (name, op) in &self.observables {
                    let v = operator::expect(op, &rho)?;
                    series.channels.get_mut(*name).expect("channel").push(v.re);
                }
                series.channels.get_mut("trace").expect("channel").push(operator::trace(&rho).re);
            }
            if k < n_steps {
                let t_next = (k + 1) as f64 * h;
                advance(&mut stepper, &mut sys, &mut u, t, t_next);
                t = t_next;
            }
        }
        Ok(series)
    }
}

/// Deviation of one observable between hierarchy and oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct Deviation {
    pub observable: String,
    pub max_abs: f64,
    /// `max_abs` relative to the oracle peak.
    pub max_rel: f64,
    /// Relative deviation at the oracle peak, or between the two peak values,
    /// whichever is larger.
    pub peak_rel: f64,
    pub oracle_peak: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub kappa_s: f64,
    pub rows: Vec<Deviation>,
}

impl DeviationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| r.peak_rel <= tol)
    }
}

/// Run the hierarchy with the exponential mode of width `kappa_s` and the
/// source-cavity model side by side, and compare `observables` over
/// `[0, t_end]`.
pub fn cross_validate(
    model: &CompositeModel,
    kappa_s: f64,
    omega_in: f64,
    observables: &[&str],
    t_end: f64,
) -> Result<DeviationReport> {
    let pulse = make_exponential_pulse(kappa_s, omega_in)?;
    let policy = default_policy(&pulse);
    let h = policy.step_size();
    let sample_every = 10.0_f64.max(h);
    let opts = EvolveOptions::new(t_end, policy)
        .record(vec![Observable::S1dagS1, Observable::S2dagS2, Observable::EqualTimeC])
        .sample_every(sample_every);
    let hier = evolve(model, &pulse, &opts)?.series;
    let oracle = build_source_model(model, kappa_s, omega_in)?.evolve(t_end, h, sample_every)?;
    let mut rows = Vec::new();
    for &name in observables {
        let (a, b) = match (hier.get(name), oracle.get(name)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::InvalidParameter(format!("unknown observable {name}"))),
        };
        let n = a.len().min(b.len());
        let max_abs = (0..n).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max);
        let (k_peak, &peak) = b[..n].iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).expect("samples");
        let hier_peak = a[..n].iter().copied().fold(f64::MIN, f64::max);
        let peak_rel = ((a[k_peak] - peak).abs().max((hier_peak - peak).abs())) / peak;
        rows.push(Deviation { observable: name.to_string(), max_abs, max_rel: max_abs / peak, peak_rel, oracle_peak: peak });
    }
    Ok(DeviationReport { kappa_s, rows })
}
