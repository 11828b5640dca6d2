//! The nine acceptance criteria, each evaluated at full desk scale
//! (`n_fock = 30`, `n_keep = 8`, composite dimension 64, `T = 1500`).
//!
//! Every criterion returns a [`Verdict`]; `tests/acceptance.rs` prints one
//! PASS/FAIL line per criterion and fails on FAIL.

use std::f64::consts::PI;
use std::sync::OnceLock;

use usc_cascade::composite::{assemble, CascadeParams};
use usc_cascade::correlations::{default_t_grid, delayed_c, CorrelationRequest, RegressionMethod};
use usc_cascade::experiment::{build_model, operating_point, sweep_row, Axis, OperatingPoint, RunConfig};
use usc_cascade::hierarchy::{evolve, tolerance, EvolveOptions, Evolution, Observable, Sampling};
use usc_cascade::integrate::StepPolicy;
use usc_cascade::operator::{self, qubit, Operator};
use usc_cascade::oracle::cross_validate;
use usc_cascade::pulse::PulseSpec;
use usc_cascade::spectrum::{avoided_crossings, scan_spectrum};
use usc_cascade::subsystem::{dress, quadrature, SubsystemSpec};
use usc_cascade::Result;

#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} criterion {} ({}): {}", self.id, self.title, self.detail)
    }
}

fn verdict(id: u8, title: &'static str, checks: Vec<(bool, String)>) -> Verdict {
    let passed = checks.iter().all(|(ok, _)| *ok);
    let detail = checks
        .iter()
        .map(|(ok, s)| format!("{}{s}", if *ok { "" } else { "[x] " }))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict { id, title, passed, detail }
}

fn errored(id: u8, title: &'static str, e: usc_cascade::Error) -> Verdict {
    Verdict { id, title, passed: false, detail: format!("error: {e}") }
}

/// Least-squares line `y = a + b x`; returns `(a, b, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}

/// Shared state of the dynamics criteria, computed once per process.
pub struct Baseline {
    pub cfg: RunConfig,
    pub point: OperatingPoint,
    pub pulse: PulseSpec,
    pub dynamics: Evolution,
    /// `c_max` at `d/(cT)` in [`DELAYS`].
    pub c_max: Vec<f64>,
}

pub const DELAYS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

fn compute_baseline() -> Result<Baseline> {
    let cfg = RunConfig::default();
    let point = operating_point(&cfg, None)?;
    let model = build_model(&cfg, point.omega_c, &cfg.cascade_params())?;
    let pulse = cfg.pulse(point.omega_in)?;
    let policy = cfg.policy(&model, &pulse)?;
    let opts = EvolveOptions::new(pulse.default_t_end(), policy).sample_every(cfg.integrator.sample_every);
    let dynamics = evolve(&model, &pulse, &opts)?;
    let c_max = DELAYS
        .iter()
        .map(|&d| sweep_row(&cfg, Axis::Delay, &point, d).map(|r| r.c_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(Baseline { cfg, point, pulse, dynamics, c_max })
}

pub fn baseline() -> std::result::Result<&'static Baseline, String> {
    static CELL: OnceLock<std::result::Result<Baseline, String>> = OnceLock::new();
    CELL.get_or_init(|| compute_baseline().map_err(|e| e.to_string())).as_ref().map_err(Clone::clone)
}

fn base_or_fail(id: u8, title: &'static str) -> std::result::Result<&'static Baseline, Verdict> {
    baseline().map_err(|e| Verdict { id, title, passed: false, detail: format!("baseline failed: {e}") })
}

// ---- 1 ----

pub fn criterion_1() -> Verdict {
    const T: &str = "spectrum structure";
    match spectrum_checks() {
        Ok(c) => verdict(1, T, c),
        Err(e) => errored(1, T, e),
    }
}

fn spectrum_checks() -> Result<Vec<(bool, String)>> {
    let cfg = RunConfig::default();
    let params = cfg.cascade_params();
    let spec = cfg.subsystem_spec(1.2);
    let mut checks = Vec::new();

    // Crossings inside the stated window, on a grid matching its resolution.
    let window: Vec<f64> = (0..361).map(|k| 1.2 + 1.8 * k as f64 / 360.0).collect();
    let table = scan_spectrum(&spec, &spec, &params, &window, 8)?;
    let inside = avoided_crossings(&table, &spec, &spec, &params, &[3, 4])?;
    checks.push((inside.len() == 2, format!("{} avoided crossings among levels 3,4,5 in [1.2, 3.0] (want 2)", inside.len())));

    // The same search on the extended default grid, which brackets them.
    let wide: Vec<f64> = (0..381).map(|k| 1.1 + 1.9 * k as f64 / 380.0).collect();
    let table = scan_spectrum(&spec, &spec, &params, &wide, 8)?;
    let all = avoided_crossings(&table, &spec, &spec, &params, &[3, 4])?;
    let listing: Vec<String> = all.iter().map(|c| format!("{}-{} at {:.6} gap {:.3e}", c.lower, c.upper, c.omega_c, c.gap)).collect();
    checks.push((true, format!("on [1.1, 3.0]: {}", listing.join(", "))));

    let kappa1 = params.kappa1;
    let two = all.iter().find(|c| c.lower == 4);
    match two {
        Some(c) => {
            let ratio = c.gap / kappa1;
            checks.push(((0.2..=5.0).contains(&ratio), format!("4-5 gap / kappa1 = {ratio:.3} (want within [0.2, 5])")));
        }
        None => checks.push((false, "no 4-5 avoided crossing found".into())),
    }

    // Single-excitation polariton splitting of one subsystem at bare
    // resonance. At eta = 0.5 this anticrossing is broad and E2 - E1 has no
    // interior minimum, so the resonant splitting stands in for its gap.
    let d = dress(&cfg.subsystem_spec(cfg.subsystem.omega_q))?;
    let single = d.energies[2] - d.energies[1];
    let largest_two = all.iter().map(|c| c.gap).fold(0.0, f64::max);
    let ratio = single / largest_two;
    checks.push((
        !all.is_empty() && ratio >= 10.0,
        format!("single-excitation splitting {single:.4} at resonance is {ratio:.0}x the two-excitation gaps (want >= 10)"),
    ));

    // Labels at the large-omega_c end of the window.
    let end = scan_spectrum(&spec, &spec, &params, &[3.0], 8)?;
    let p = end.points[0].as_ref().map_err(|e| usc_cascade::Error::NotConverged(e.clone()))?;
    let w3 = p.dictionary.weight(&p.states[3], "ee00").unwrap_or(0.0);
    checks.push((w3 > 0.9, format!("|<3|ee00>|^2 = {w3:.3}")));
    let plus = "(gg10+gg01)/sqrt2";
    let minus = "(gg10-gg01)/sqrt2";
    let combo = |k: usize| {
        let a = p.dictionary.weight(&p.states[k], plus).unwrap_or(0.0);
        let b = p.dictionary.weight(&p.states[k], minus).unwrap_or(0.0);
        a.max(b)
    };
    let (w4, w5) = (combo(4), combo(5));
    checks.push((w4 > 0.9 && w5 > 0.9, format!("levels 4,5 on (gg10 +- gg01)/sqrt2: {w4:.3}, {w5:.3}")));
    Ok(checks)
}

// ---- 2 ----

pub fn criterion_2() -> Verdict {
    const T: &str = "joint-excitation dynamics";
    let b = match base_or_fail(2, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    let s = &b.dynamics.series;
    let t1 = s.argmax_time("S1dagS1").unwrap_or(f64::NAN);
    let t2 = s.argmax_time("S2dagS2").unwrap_or(f64::NAN);
    let (c0, c1) = (b.c_max[0], b.c_max[2]);
    verdict(
        2,
        T,
        vec![
            (true, format!("omega_c* = {:.8}, omega_in = {:.6}", b.point.omega_c, b.point.omega_in)),
            (t2 > t1, format!("S2 peak at t = {t2} after S1 peak at t = {t1}")),
            (c0 > 0.0, format!("c_max(d=0) = {c0:.6e}")),
            (c1 > 0.2 * c0, format!("c_max(d=cT)/c_max(0) = {:.4} (want > 0.2)", c1 / c0)),
        ],
    )
}

// ---- 3 ----

pub fn criterion_3() -> Verdict {
    const T: &str = "delay damping";
    let b = match base_or_fail(3, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    let c = &b.c_max;
    let ratio = c[3] / c[0];
    let monotone = c.windows(2).all(|w| w[1] <= w[0]);
    let logs: Vec<f64> = c.iter().map(|v| v.ln()).collect();
    let (_, slope, r2) = linear_fit(&DELAYS, &logs);
    verdict(
        3,
        T,
        vec![
            (
                (1.0 / 20.0..=1.0 / 5.0).contains(&ratio),
                format!("c_max(2cT)/c_max(0) = {ratio:.4} = 1/{:.1} (want in [1/20, 1/5])", 1.0 / ratio),
            ),
            (monotone, format!("c_max at d/(cT) = 0, 0.5, 1, 2: {:.4e} {:.4e} {:.4e} {:.4e}", c[0], c[1], c[2], c[3])),
            (r2 > 0.95, format!("log-linear fit slope {slope:.4}, R^2 = {r2:.5} (want > 0.95)")),
        ],
    )
}

// ---- 4 ----

pub const GAINS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

pub fn criterion_4() -> Verdict {
    const T: &str = "gain linearity";
    let b = match base_or_fail(4, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    let rows: Result<Vec<f64>> = GAINS
        .iter()
        .map(|&g| if g == 1.0 { Ok(b.c_max[0]) } else { sweep_row(&b.cfg, Axis::Gain, &b.point, g).map(|r| r.c_max) })
        .collect();
    match rows {
        Ok(c) => {
            let (a, slope, r2) = linear_fit(&GAINS, &c);
            verdict(
                4,
                T,
                vec![
                    (true, format!("c_max at G = 0.2..1.0: {}", c.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(" "))),
                    (r2 > 0.98, format!("fit {a:.3e} + {slope:.3e} G, R^2 = {r2:.5} (want > 0.98)")),
                ],
            )
        }
        Err(e) => errored(4, T, e),
    }
}

// ---- 5 ----

pub fn criterion_5() -> Verdict {
    const T: &str = "robustness to qubit decay";
    let b = match base_or_fail(5, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    let gamma = b.cfg.cascade.kappa1;
    match sweep_row(&b.cfg, Axis::Gamma, &b.point, gamma) {
        Ok(r) => {
            let ratio = r.c_max / b.c_max[0];
            verdict(5, T, vec![(ratio > 0.5, format!("c_max(gamma = kappa1 = {gamma})/c_max(0) = {ratio:.4} (want > 0.5)"))])
        }
        Err(e) => errored(5, T, e),
    }
}

// ---- 6 ----

pub fn criterion_6() -> Verdict {
    const T: &str = "detuning selectivity";
    let b = match base_or_fail(6, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    let Some(crossing) = b.point.crossing else {
        return Verdict { id: 6, title: T, passed: false, detail: "operating point was not located".into() };
    };
    let s = &b.dynamics.series;
    let (s1, s2) = (s.max("S1dagS1"), s.max("S2dagS2"));
    let mut checks = vec![(true, format!("gap {:.4e}; at the crossing S1max {s1:.4}, S2max {s2:.4}", crossing.gap))];
    for sign in [1.0, -1.0] {
        let w = crossing.omega_c + sign * 10.0 * crossing.gap;
        match sweep_row(&b.cfg, Axis::OmegaC, &b.point, w) {
            Ok(r) => {
                let drop = b.c_max[0] / r.c_max;
                let d1 = (r.s1_max.unwrap_or(f64::NAN) / s1 - 1.0).abs();
                let d2 = (r.s2_max.unwrap_or(f64::NAN) / s2 - 1.0).abs();
                checks.push((drop >= 5.0, format!("omega_c {w:.6}: c_max reduced {drop:.2}x (want >= 5)")));
                checks.push((
                    d1 < 0.2 && d2 < 0.2,
                    format!("omega_c {w:.6}: S1max changes {:.1}%, S2max {:.1}% (want < 20%)", 100.0 * d1, 100.0 * d2),
                ));
            }
            Err(e) => checks.push((false, format!("omega_c {w:.6}: {e}"))),
        }
    }
    verdict(6, T, checks)
}

// ---- 7 ----

pub const ORACLE_KAPPA_S: [f64; 2] = [0.002, 0.004];

pub fn criterion_7() -> Verdict {
    const T: &str = "oracle equivalence";
    let b = match base_or_fail(7, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    let model = match build_model(&b.cfg, b.point.omega_c, &b.cfg.cascade_params()) {
        Ok(m) => m,
        Err(e) => return errored(7, T, e),
    };
    let mut checks = Vec::new();
    for ks in ORACLE_KAPPA_S {
        match cross_validate(&model, ks, b.point.omega_in, &["S1dagS1", "S2dagS2", "C"], 8.0 / ks) {
            Ok(rep) => {
                for r in &rep.rows {
                    checks.push((
                        r.peak_rel <= 1e-3,
                        format!("kappa_s {ks}: {} peak {:.4e}, relative deviation {:.2e}", r.observable, r.oracle_peak, r.peak_rel),
                    ));
                }
            }
            Err(e) => checks.push((false, format!("kappa_s {ks}: {e}"))),
        }
    }
    verdict(7, T, checks)
}

// ---- 8 ----

pub fn criterion_8() -> Verdict {
    const T: &str = "invariant suite";
    let b = match base_or_fail(8, T) {
        Ok(b) => b,
        Err(v) => return v,
    };
    match invariant_checks(b) {
        Ok(c) => verdict(8, T, c),
        Err(e) => errored(8, T, e),
    }
}

fn invariant_checks(b: &Baseline) -> Result<Vec<(bool, String)>> {
    let mut checks = Vec::new();
    let r = b.dynamics.invariants;
    checks.push((
        r.trace_error < tolerance::TRACE
            && r.hermiticity_error < tolerance::HERMITICITY
            && r.pairing_error < tolerance::HERMITICITY
            && r.min_eigenvalue > tolerance::POSITIVITY,
        format!(
            "{} samples: trace {:.1e}, hermiticity {:.1e}, pairing {:.1e}, min eigenvalue {:.1e}",
            r.samples, r.trace_error, r.hermiticity_error, r.pairing_error, r.min_eigenvalue
        ),
    ));
    checks.push((true, "every other acceptance run checks the same invariants at each sample and aborts on a breach".into()));

    let model = build_model(&b.cfg, b.point.omega_c, &b.cfg.cascade_params())?;
    let policy = b.cfg.policy(&model, &b.pulse)?;

    // Vacuum input.
    let vac = PulseSpec { norm: 0.0, ..b.pulse };
    let opts = EvolveOptions::new(b.pulse.default_t_end(), policy).sample_every(50.0).record(vec![
        Observable::S1dagS1,
        Observable::S2dagS2,
        Observable::A1dagA1,
        Observable::A2dagA2,
        Observable::EqualTimeC,
    ]);
    let v = evolve(&model, &vac, &opts)?.series;
    let worst = v.channels.values().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    checks.push((worst < 1e-12, format!("vacuum input: largest observable {worst:.1e} (want < 1e-12)")));

    // Zero delay against the equal-time value on the same grid.
    let grid = default_t_grid(&b.pulse, 0.0, b.cfg.correlation.points);
    let req = CorrelationRequest { tau_d: 0.0, t_grid: grid.clone(), method: RegressionMethod::default() };
    let delayed = delayed_c(&model, &b.pulse, policy, &req)?.series;
    let mut opts = EvolveOptions::new(*grid.last().expect("grid"), policy).record(vec![Observable::EqualTimeC]);
    opts.sampling = Sampling::Times(grid);
    let direct = evolve(&model, &b.pulse, &opts)?.series;
    let diff = delayed
        .get("C")
        .expect("C")
        .iter()
        .zip(direct.get("C").expect("C"))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    checks.push((diff <= 1e-9, format!("delayed C at tau = 0 vs equal-time C: {diff:.1e} (want <= 1e-9)")));

    // Step halving on the dynamics channels, sampled at common times.
    let h = policy.step_size();
    let every = 5.0 * h;
    let run = |step: f64| {
        let mut opts = EvolveOptions::new(b.pulse.default_t_end(), StepPolicy::Etd { h: step });
        opts.sampling = Sampling::Stride((every / step).round() as usize);
        evolve(&model, &b.pulse, &opts)
    };
    let delta = run(h)?.series.max_abs_diff(&run(h / 2.0)?.series);
    checks.push((delta < 1e-6, format!("step {h} vs {}: max change {delta:.1e} (want < 1e-6)", h / 2.0)));
    Ok(checks)
}

// ---- 9 ----

pub fn criterion_9() -> Verdict {
    const T: &str = "limit suite";
    match limit_checks() {
        Ok(c) => verdict(9, T, c),
        Err(e) => errored(9, T, e),
    }
}

fn limit_checks() -> Result<Vec<(bool, String)>> {
    let mut checks = Vec::new();
    let nf = 30;

    // eta -> 0, theta = 0: bare spectrum and bare operators.
    let omega_c = 1.7;
    let d = dress(&SubsystemSpec::new(omega_c, 0.0, 0.0).with_truncation(nf, 8))?;
    let mut bare: Vec<f64> = (0..nf).flat_map(|n| [n as f64 * omega_c - 0.5, n as f64 * omega_c + 0.5]).collect();
    bare.sort_by(f64::total_cmp);
    let e_err = d.energies.iter().zip(&bare).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push((e_err < 1e-12, format!("eta = 0 energies vs bare sums: {e_err:.1e}")));
    let (a_err, s_err) = bare_operator_errors(&d);
    checks.push((a_err < 1e-12 && s_err < 1e-12, format!("A vs a: {a_err:.1e}, S vs sigma: {s_err:.1e}")));

    // Pythagorean identity of the spectral calculus.
    let x = quadrature(nf).mapv(|z| z * 0.5);
    let s2 = operator::func_of_hermitian(&x, |v| v.sin().powi(2))?;
    let c2 = operator::func_of_hermitian(&x, |v| v.cos().powi(2))?;
    let p_err = operator::max_abs_diff(&(s2 + c2), &operator::identity(nf));
    checks.push((p_err < 1e-12, format!("sin^2 + cos^2 - I: {p_err:.1e}")));

    // Strict triangularity at the operating parameters.
    let d = dress(&SubsystemSpec::new(1.1824, 0.5, PI / 5.0))?;
    let below = (0..8).flat_map(|i| (0..=i).map(move |j| (i, j))).fold(0.0f64, |m, (i, j)| {
        m.max(d.a[[i, j]].norm()).max(d.s[[i, j]].norm())
    });
    checks.push((below == 0.0, format!("largest A, S entry on or below the diagonal: {below:e}")));

    // trace([X, Y]) = 0 for composite operators.
    let m = assemble(&d, &d, &CascadeParams::new(0.004, 0.001))?;
    let ops: Vec<&Operator> = m.observables.values().chain(std::iter::once(&m.h)).collect();
    let mut tr = 0.0f64;
    for a in &ops {
        for b in &ops {
            tr = tr.max(operator::trace(&operator::commutator(a, b)).norm());
        }
    }
    checks.push((tr < 1e-10, format!("largest |trace [X, Y]| over composite operators: {tr:.1e}")));
    Ok(checks)
}

fn bare_operator_errors(d: &usc_cascade::subsystem::DressedSubsystem) -> (f64, f64) {
    // Kept levels at eta = 0 alternate g/e ladders; map each to its bare
    // (photons, excited) label and compare matrix elements.
    let omega_c = d.spec.omega_c;
    let labels: Vec<(usize, bool)> = d
        .energies
        .iter()
        .map(|e| {
            let n = ((e + 0.5) / omega_c).round();
            if ((n * omega_c - 0.5) - e).abs() < 1e-9 {
                (n as usize, false)
            } else {
                (((e - 0.5) / omega_c).round() as usize, true)
            }
        })
        .collect();
    let a = operator::annihilation(d.spec.n_fock);
    let sigma = qubit::lowering();
    let k = d.energies.len();
    let (mut ea, mut es) = (0.0f64, 0.0f64);
    for i in 0..k {
        for j in 0..k {
            let ((ni, qi), (nj, qj)) = (labels[i], labels[j]);
            let want_a = if qi == qj { a[[ni, nj]].norm() } else { 0.0 };
            let want_s = if ni == nj { sigma[[qi as usize, qj as usize]].norm() } else { 0.0 };
            ea = ea.max((d.a[[i, j]].norm() - want_a).abs());
            es = es.max((d.s[[i, j]].norm() - want_s).abs());
        }
    }
    (ea, es)
}
