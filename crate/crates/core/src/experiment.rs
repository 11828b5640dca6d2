//! Whole runs driven by a [`RunConfig`]: spectrum scans, dynamics, delayed
//! correlations, parameter sweeps and oracle validation, each persisted as a
//! CSV table with a `#` metadata header.
//!
//! Config files are TOML. Any key can be overridden from the environment as
//! `USC_<SECTION>__<KEY>`, e.g. `USC_CASCADE__GAIN=0.6`. All frequencies and
//! rates are in units of `omega_q`, times in units of `1/omega_q`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composite::{assemble, CascadeParams, CompositeModel};
use crate::correlations::{c_max, default_t_grid, delayed_c, linspace, CorrelationRequest, RegressionMethod};
use crate::error::{Error, Result};
use crate::hierarchy::{default_policy, evolve, rk4_policy, EvolveOptions, Evolution, Observable, TimeSeries};
use crate::integrate::StepPolicy;
use crate::oracle::{cross_validate, DeviationReport};
use crate::pulse::{self, carrier_from_spectrum, make_exponential_pulse, make_gaussian_pulse, PulseSpec};
use crate::spectrum::{self, avoided_crossings, scan_spectrum, Crossing, SpectrumTable};
use crate::subsystem::{dress, SubsystemSpec};

pub const ENV_PREFIX: &str = "USC_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsystemSection {
    pub omega_q: f64,
    pub eta: f64,
    pub theta: f64,
    pub n_fock: usize,
    pub n_keep: usize,
    /// Operating cavity frequency; the located crossing when absent.
    pub omega_c: Option<f64>,
}

impl Default for SubsystemSection {
    fn default() -> Self {
        Self {
            omega_q: 1.0,
            eta: 0.5,
            theta: std::f64::consts::PI / 5.0,
            n_fock: SubsystemSpec::DEFAULT_N_FOCK,
            n_keep: SubsystemSpec::DEFAULT_N_KEEP,
            omega_c: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeSection {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gain: f64,
}

impl Default for CascadeSection {
    fn default() -> Self {
        Self { kappa1: 0.004, kappa2: 0.001, gamma1: 0.0, gamma2: 0.0, gain: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Gaussian,
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub shape: ShapeName,
    /// Gaussian width `T`.
    pub duration: f64,
    /// Gaussian peak time; `3T` when absent.
    pub t0: Option<f64>,
    /// Decay rate of the exponential mode.
    pub kappa_s: f64,
    /// Carrier; `(w4 + w5 - 2 w0)/2` at the operating point when absent.
    pub omega_in: Option<f64>,
    /// Drop the photon: the null run.
    pub vacuum: bool,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { shape: ShapeName::Gaussian, duration: 1500.0, t0: None, kappa_s: 0.002, omega_in: None, vacuum: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Etd,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub method: MethodName,
    /// Step size; `min(4, T/375)` for ETD and the stability bound for RK4
    /// when absent.
    pub step: Option<f64>,
    /// Step of the backward Heisenberg propagation in the delay.
    pub adjoint_step: f64,
    pub sample_every: f64,
    /// End of the dynamics run; pulse dependent when absent.
    pub t_end: Option<f64>,
    pub check_invariants: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self { method: MethodName::Etd, step: None, adjoint_step: 1.0, sample_every: 10.0, t_end: None, check_invariants: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// `a:b:n`
    pub grid: String,
    pub levels: usize,
    /// The operating crossing is between `crossing_lower` and the level above.
    pub crossing_lower: usize,
    /// Lower levels of the adjacent pairs searched for avoided crossings.
    pub tracked: Vec<usize>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { grid: "1.1:3.0:381".into(), levels: 8, crossing_lower: 4, tracked: vec![3, 4] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethodName {
    Adjoint,
    Sandwich,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationSection {
    /// Separation `d/(cT)`, i.e. the delay in units of the pulse width.
    pub delay: f64,
    pub points: usize,
    pub method: CorrelationMethodName,
    pub checkpoint_stride: f64,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self { delay: 0.0, points: 200, method: CorrelationMethodName::Adjoint, checkpoint_stride: 100.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Gamma,
    Delay,
    Gain,
    OmegaC,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::Delay => "delay",
            Axis::Gain => "gain",
            Axis::OmegaC => "omega_c",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(Axis::Gamma),
            "delay" => Ok(Axis::Delay),
            "gain" => Ok(Axis::Gain),
            "omega_c" => Ok(Axis::OmegaC),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?}; expected gamma, delay, gain or omega_c"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: Axis,
    /// `a:b:n` grids per axis. `gamma` sets both qubit decay rates,
    /// `delay` is `d/(cT)`, `omega_c` is absolute.
    pub gamma: String,
    pub delay: String,
    pub gain: String,
    pub omega_c: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: Axis::Gain,
            gamma: "0:0.004:5".into(),
            delay: "0:2:5".into(),
            gain: "0.2:1.0:5".into(),
            omega_c: "1.172:1.192:11".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub kappa_s: Vec<f64>,
    pub tolerance: f64,
    /// `8/kappa_s` when absent.
    pub t_end: Option<f64>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { kappa_s: vec![0.002, 0.004], tolerance: 1e-3, t_end: None }
    }
}

/// Everything a run needs. Deterministic: there is no seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub subsystem: SubsystemSection,
    pub cascade: CascadeSection,
    pub pulse: PulseSection,
    pub integrator: IntegratorSection,
    pub spectrum: SpectrumSection,
    pub correlation: CorrelationSection,
    pub sweep: SweepSection,
    pub validate: ValidateSection,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn parse_override(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    /// Parse `text`, then apply `USC_SECTION__KEY=value` overrides from `vars`.
    pub fn from_toml_with_env(text: &str, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(config_err)?;
        for (key, raw) in vars {
            let Some(path) = key.strip_prefix(ENV_PREFIX) else { continue };
            let Some((section, field)) = path.split_once("__") else {
                return Err(Error::Config(format!("{key}: expected {ENV_PREFIX}<SECTION>__<KEY>")));
            };
            let section = section.to_ascii_lowercase();
            let entry = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(Default::default()));
            let toml::Value::Table(t) = entry else {
                return Err(Error::Config(format!("{key}: {section} is not a section")));
            };
            t.insert(field.to_ascii_lowercase(), parse_override(&raw));
        }
        let cfg: RunConfig = table.try_into().map_err(config_err)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Read a config file and apply overrides from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<()> {
        let spec = self.subsystem_spec(self.subsystem.omega_c.unwrap_or(1.0));
        spec.validate().map_err(config_err)?;
        self.cascade_params().validate().map_err(config_err)?;
        parse_grid(&self.spectrum.grid)?;
        for g in [&self.sweep.gamma, &self.sweep.delay, &self.sweep.gain, &self.sweep.omega_c] {
            parse_grid(g)?;
        }
        if !(self.pulse.duration > 0.0) {
            return Err(Error::Config("pulse.duration must be positive".into()));
        }
        if self.correlation.delay < 0.0 {
            return Err(Error::Config("correlation.delay must be nonnegative".into()));
        }
        if self.validate.kappa_s.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("validate.kappa_s entries must be positive".into()));
        }
        Ok(())
    }

    pub fn subsystem_spec(&self, omega_c: f64) -> SubsystemSpec {
        let s = &self.subsystem;
        SubsystemSpec { omega_c, omega_q: s.omega_q, eta: s.eta, theta: s.theta, n_fock: s.n_fock, n_keep: s.n_keep }
    }

    pub fn cascade_params(&self) -> CascadeParams {
        let c = &self.cascade;
        CascadeParams { kappa1: c.kappa1, kappa2: c.kappa2, gamma1: c.gamma1, gamma2: c.gamma2, gain: c.gain }
    }

    pub fn sweep_grid(&self, axis: Axis) -> &str {
        match axis {
            Axis::Gamma => &self.sweep.gamma,
            Axis::Delay => &self.sweep.delay,
            Axis::Gain => &self.sweep.gain,
            Axis::OmegaC => &self.sweep.omega_c,
        }
    }

    fn regression(&self) -> RegressionMethod {
        match self.correlation.method {
            CorrelationMethodName::Adjoint => RegressionMethod::Adjoint { step: self.integrator.adjoint_step },
            CorrelationMethodName::Sandwich => {
                RegressionMethod::ForwardSandwich { checkpoint_stride: self.correlation.checkpoint_stride }
            }
        }
    }

    /// The configured pulse at carrier `omega_in`.
    pub fn pulse(&self, omega_in: f64) -> Result<PulseSpec> {
        let p = &self.pulse;
        let spec = match p.shape {
            ShapeName::Gaussian => make_gaussian_pulse(p.duration, p.t0.unwrap_or(3.0 * p.duration), omega_in)?,
            ShapeName::Exponential => make_exponential_pulse(p.kappa_s, omega_in)?,
        };
        Ok(if p.vacuum { PulseSpec { norm: 0.0, ..spec } } else { spec })
    }

    fn t_end(&self, pulse: &PulseSpec) -> f64 {
        self.integrator.t_end.unwrap_or_else(|| match pulse.shape {
            pulse::PulseShape::Vacuum => 1.0,
            _ => {
                let scale = pulse.time_scale();
                let t0 = pulse.peak_time();
                match self.pulse.shape {
                    ShapeName::Gaussian => t0 + 4.0 * scale,
                    ShapeName::Exponential => 8.0 * scale,
                }
            }
        })
    }

    pub fn policy(&self, model: &CompositeModel, pulse: &PulseSpec) -> Result<StepPolicy> {
        Ok(match (self.integrator.method, self.integrator.step) {
            (MethodName::Etd, Some(h)) => StepPolicy::Etd { h },
            (MethodName::Etd, None) => default_policy(pulse),
            (MethodName::Rk4, Some(dt)) => StepPolicy::Rk4 { dt },
            (MethodName::Rk4, None) => rk4_policy(model, pulse)?,
        })
    }
}

/// `a:b:n` into `n` evenly spaced points from `a` to `b`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("grid {s:?}: expected a:b:n"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || (n > 1 && !(b > a)) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    Ok(linspace(a, b, n))
}

/// Hex SHA-256 of the little-endian bytes of `values`.
pub fn grid_hash(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Where a run sits on the spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatingPoint {
    pub omega_c: f64,
    /// The located crossing, when the operating point came from a scan.
    pub crossing: Option<Crossing>,
    pub omega_in: f64,
    pub energies: Vec<f64>,
}

/// Locate the configured crossing on the spectrum grid and refine it.
pub fn locate_crossing(cfg: &RunConfig) -> Result<Crossing> {
    let n = cfg.spectrum.crossing_lower;
    let grid = parse_grid(&cfg.spectrum.grid)?;
    let spec = cfg.subsystem_spec(grid[0]);
    let params = cfg.cascade_params();
    let table = scan_spectrum(&spec, &spec, &params, &grid, cfg.spectrum.levels.max(n + 2))?;
    let found = avoided_crossings(&table, &spec, &spec, &params, &[n])?;
    found
        .into_iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .ok_or_else(|| Error::Crossing(format!("no avoided crossing between levels {n} and {} on {}", n + 1, cfg.spectrum.grid)))
}

/// Operating point at `omega_c`, or at the located crossing when `None`.
pub fn operating_point(cfg: &RunConfig, omega_c: Option<f64>) -> Result<OperatingPoint> {
    let (omega_c, crossing) = match omega_c.or(cfg.subsystem.omega_c) {
        Some(w) => (w, None),
        None => {
            let c = locate_crossing(cfg)?;
            (c.omega_c, Some(c))
        }
    };
    let spec = cfg.subsystem_spec(omega_c);
    let energies = spectrum::composite_levels(&spec, &spec, &cfg.cascade_params(), omega_c)?;
    let n = cfg.spectrum.crossing_lower;
    let omega_in = match cfg.pulse.omega_in {
        Some(w) => w,
        None => carrier_from_spectrum(energies[0], energies[n], energies[n + 1])?,
    };
    Ok(OperatingPoint { omega_c, crossing, omega_in, energies })
}

pub fn build_model(cfg: &RunConfig, omega_c: f64, params: &CascadeParams) -> Result<CompositeModel> {
    let d = dress(&cfg.subsystem_spec(omega_c))?;
    assemble(&d, &d, params)
}

/// Run `f` on a rayon pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

// ---- CSV output ----

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Builder for a CSV table with a `#` metadata header.
pub struct Table {
    meta: Vec<(String, String)>,
    config: Option<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), config: None, columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn config(mut self, cfg: &RunConfig) -> Self {
        self.config = Some(cfg.to_toml());
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn write_to(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "# usc-cascade {}", env!("CARGO_PKG_VERSION"))?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k} = {v}")?;
        }
        if let Some(c) = &self.config {
            writeln!(w, "# config:")?;
            for line in c.lines() {
                writeln!(w, "#   {line}")?;
            }
        }
        let mut csv = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        csv.write_record(&self.columns).map_err(io)?;
        for r in &self.rows {
            csv.write_record(r).map_err(io)?;
        }
        let bytes = csv.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut v = Vec::new();
        self.write_to(&mut v).map_err(|_| std::fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&v))
    }
}

// ---- spectrum ----

pub struct SpectrumOutput {
    pub table: SpectrumTable,
    pub crossings: Vec<Crossing>,
}

impl SpectrumOutput {
    pub fn levels_table(&self, cfg: &RunConfig) -> Table {
        let k = self.table.levels;
        let mut cols = vec!["omega_c".to_string()];
        cols.extend((0..k).map(|j| format!("level_{j}")));
        for j in 0..k {
            cols.push(format!("label_{j}"));
            cols.push(format!("weight_{j}"));
        }
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new(&col_refs)
            .meta("command", "spectrum")
            .meta("grid_sha256", grid_hash(&self.table.grid))
            .config(cfg);
        for (w, p) in self.table.grid.iter().zip(&self.table.points) {
            let mut r = vec![fmt(*w)];
            match p {
                Ok(p) => {
                    r.extend(p.energies.iter().map(|e| fmt(*e)));
                    for (tag, weight) in &p.labels {
                        r.push(tag.clone());
                        r.push(fmt(*weight));
                    }
                }
                Err(e) => {
                    log::warn!("omega_c = {w}: {e}");
                    r.extend((0..3 * k).map(|_| "nan".to_string()));
                }
            }
            t.row(r);
        }
        t
    }

    pub fn crossings_table(&self, cfg: &RunConfig) -> Table {
        let mut t = Table::new(&["lower", "upper", "omega_c", "gap"])
            .meta("command", "spectrum crossings")
            .meta("grid_sha256", grid_hash(&self.table.grid))
            .config(cfg);
        for c in &self.crossings {
            t.row(vec![c.lower.to_string(), c.upper.to_string(), fmt(c.omega_c), fmt(c.gap)]);
        }
        t
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumOutput> {
    let grid = parse_grid(&cfg.spectrum.grid)?;
    let spec = cfg.subsystem_spec(grid[0]);
    let params = cfg.cascade_params();
    let table = scan_spectrum(&spec, &spec, &params, &grid, cfg.spectrum.levels)?;
    let crossings = if cfg.subsystem.eta == 0.0 {
        Vec::new()
    } else {
        avoided_crossings(&table, &spec, &spec, &params, &cfg.spectrum.tracked)?
    };
    Ok(SpectrumOutput { table, crossings })
}

// ---- dynamics ----

pub struct DynamicsOutput {
    pub point: OperatingPoint,
    pub pulse: PulseSpec,
    pub evolution: Evolution,
}

impl DynamicsOutput {
    pub fn table(&self, cfg: &RunConfig) -> Table {
        let s = &self.evolution.series;
        let mut t = Table::new(&["t", "S1dagS1", "S2dagS2", "C_equal_time", "pulse_envelope"])
            .meta("command", "dynamics")
            .meta("omega_c", fmt(self.point.omega_c))
            .meta("omega_in", fmt(self.point.omega_in))
            .meta("t_sha256", grid_hash(&s.times))
            .config(cfg);
        // The envelope is exported dimensionless, scaled by sqrt(T).
        let scale = self.pulse.time_scale().sqrt();
        let ch = |n: &str| s.get(n).expect("recorded channel");
        let (a, b, c, e) = (ch("S1dagS1"), ch("S2dagS2"), ch("C"), ch("pulse_envelope"));
        for k in 0..s.len() {
            t.row(vec![fmt(s.times[k]), fmt(a[k]), fmt(b[k]), fmt(c[k]), fmt(e[k] * scale)]);
        }
        t
    }
}

pub fn cmd_dynamics(cfg: &RunConfig) -> Result<DynamicsOutput> {
    let point = operating_point(cfg, None)?;
    let model = build_model(cfg, point.omega_c, &cfg.cascade_params())?;
    let pulse = cfg.pulse(point.omega_in)?;
    let policy = cfg.policy(&model, &pulse)?;
    let mut opts = EvolveOptions::new(cfg.t_end(&pulse), policy).sample_every(cfg.integrator.sample_every);
    opts.check_invariants = cfg.integrator.check_invariants;
    let evolution = evolve(&model, &pulse, &opts)?;
    Ok(DynamicsOutput { point, pulse, evolution })
}

// ---- correlation ----

pub struct CorrelationOutput {
    pub point: OperatingPoint,
    pub tau_d: f64,
    pub series: TimeSeries,
}

impl CorrelationOutput {
    pub fn c_max(&self) -> f64 {
        c_max(&self.series)
    }

    pub fn table(&self, cfg: &RunConfig) -> Table {
        let mut t = Table::new(&["t", "C"])
            .meta("command", "correlation")
            .meta("tau_d", fmt(self.tau_d))
            .meta("G", fmt(cfg.cascade.gain))
            .meta("gamma", format!("{} {}", fmt(cfg.cascade.gamma1), fmt(cfg.cascade.gamma2)))
            .meta("omega_c", fmt(self.point.omega_c))
            .meta("omega_in", fmt(self.point.omega_in))
            .meta("t_sha256", grid_hash(&self.series.times))
            .config(cfg);
        let c = self.series.get("C").expect("C channel");
        for (ti, ci) in self.series.times.iter().zip(c) {
            t.row(vec![fmt(*ti), fmt(*ci)]);
        }
        t
    }
}

fn correlation_at(cfg: &RunConfig, point: &OperatingPoint, params: &CascadeParams, delay: f64) -> Result<(TimeSeries, f64)> {
    let model = build_model(cfg, point.omega_c, params)?;
    let pulse = cfg.pulse(point.omega_in)?;
    let policy = cfg.policy(&model, &pulse)?;
    let tau_d = delay * cfg.pulse.duration;
    let req = CorrelationRequest {
        tau_d,
        t_grid: default_t_grid(&pulse, tau_d, cfg.correlation.points),
        method: cfg.regression(),
    };
    Ok((delayed_c(&model, &pulse, policy, &req)?.series, tau_d))
}

pub fn cmd_correlation(cfg: &RunConfig) -> Result<CorrelationOutput> {
    let point = operating_point(cfg, None)?;
    let (series, tau_d) = correlation_at(cfg, &point, &cfg.cascade_params(), cfg.correlation.delay)?;
    Ok(CorrelationOutput { point, tau_d, series })
}

// ---- sweeps ----

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub c_max: f64,
    /// Single-qubit maxima, filled on the `omega_c` axis.
    pub s1_max: Option<f64>,
    pub s2_max: Option<f64>,
    pub omega_in: f64,
}

pub struct SweepOutput {
    pub axis: Axis,
    pub base: OperatingPoint,
    pub grid: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepOutput {
    pub fn table(&self, cfg: &RunConfig) -> Table {
        let with_s = self.axis == Axis::OmegaC;
        let mut cols = vec![self.axis.name(), "c_max"];
        if with_s {
            cols.extend(["S1dagS1_max", "S2dagS2_max"]);
        }
        cols.push("omega_in");
        let mut t = Table::new(&cols)
            .meta("command", format!("sweep {}", self.axis.name()))
            .meta("base_omega_c", fmt(self.base.omega_c))
            .meta("grid_sha256", grid_hash(&self.grid))
            .config(cfg);
        for r in &self.rows {
            let mut cells = vec![fmt(r.value), fmt(r.c_max)];
            if with_s {
                cells.push(fmt(r.s1_max.unwrap_or(f64::NAN)));
                cells.push(fmt(r.s2_max.unwrap_or(f64::NAN)));
            }
            cells.push(fmt(r.omega_in));
            t.row(cells);
        }
        t
    }
}

/// Single-qubit maxima of a forward run.
fn qubit_maxima(cfg: &RunConfig, point: &OperatingPoint, params: &CascadeParams) -> Result<(f64, f64)> {
    let model = build_model(cfg, point.omega_c, params)?;
    let pulse = cfg.pulse(point.omega_in)?;
    let policy = cfg.policy(&model, &pulse)?;
    let opts = EvolveOptions::new(cfg.t_end(&pulse), policy)
        .sample_every(cfg.integrator.sample_every)
        .record(vec![Observable::S1dagS1, Observable::S2dagS2]);
    let s = evolve(&model, &pulse, &opts)?.series;
    Ok((s.max("S1dagS1"), s.max("S2dagS2")))
}

/// One sweep row, independent of all others. The cavity frequency stays at
/// `base` except on the `omega_c` axis, where the carrier is re-derived from
/// the spectrum at each point.
pub fn sweep_row(cfg: &RunConfig, axis: Axis, base: &OperatingPoint, value: f64) -> Result<SweepRow> {
    let mut params = cfg.cascade_params();
    let mut delay = cfg.correlation.delay;
    let point = match axis {
        Axis::Gamma => {
            params = params.with_gamma(value);
            base.clone()
        }
        Axis::Gain => {
            params = params.with_gain(value);
            base.clone()
        }
        Axis::Delay => {
            delay = value;
            base.clone()
        }
        Axis::OmegaC => operating_point(cfg, Some(value))?,
    };
    params.validate()?;
    let (series, _) = correlation_at(cfg, &point, &params, delay)?;
    let (s1_max, s2_max) = if axis == Axis::OmegaC {
        let (a, b) = qubit_maxima(cfg, &point, &params)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    Ok(SweepRow { value, c_max: c_max(&series), s1_max, s2_max, omega_in: point.omega_in })
}

/// Rows run in parallel on the current rayon pool and come back in grid order.
pub fn cmd_sweep(cfg: &RunConfig, axis: Axis, grid: Option<&[f64]>) -> Result<SweepOutput> {
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => parse_grid(cfg.sweep_grid(axis))?,
    };
    let base = operating_point(cfg, None)?;
    let rows = grid.par_iter().map(|&v| sweep_row(cfg, axis, &base, v)).collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput { axis, base, grid, rows })
}

// ---- validation ----

pub struct ValidateOutput {
    pub point: OperatingPoint,
    pub tolerance: f64,
    pub reports: Vec<DeviationReport>,
}

impl ValidateOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passes(self.tolerance))
    }

    pub fn table(&self, cfg: &RunConfig) -> Table {
        let mut t = Table::new(&["kappa_s", "observable", "oracle_peak", "max_abs", "max_rel", "peak_rel", "status"])
            .meta("command", "validate")
            .meta("tolerance", fmt(self.tolerance))
            .meta("omega_c", fmt(self.point.omega_c))
            .meta("omega_in", fmt(self.point.omega_in))
            .config(cfg);
        for r in &self.reports {
            for d in &r.rows {
                let status = if d.peak_rel <= self.tolerance { "PASS" } else { "FAIL" };
                t.row(vec![
                    fmt(r.kappa_s),
                    d.observable.clone(),
                    fmt(d.oracle_peak),
                    fmt(d.max_abs),
                    fmt(d.max_rel),
                    fmt(d.peak_rel),
                    status.into(),
                ]);
            }
        }
        t
    }

    /// Human-readable pass/fail report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            for d in &r.rows {
                let status = if d.peak_rel <= self.tolerance { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    s,
                    "{status} kappa_s={} {:<8} peak={:.6e} peak_rel={:.3e} max_rel={:.3e}",
                    r.kappa_s, d.observable, d.oracle_peak, d.peak_rel, d.max_rel
                );
            }
        }
        let _ = writeln!(s, "{}", if self.passed() { "validate: PASS" } else { "validate: FAIL" });
        s
    }
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidateOutput> {
    let point = operating_point(cfg, None)?;
    let model = build_model(cfg, point.omega_c, &cfg.cascade_params())?;
    let reports = cfg
        .validate
        .kappa_s
        .par_iter()
        .map(|&k| {
            let t_end = cfg.validate.t_end.unwrap_or(8.0 / k);
            cross_validate(&model, k, point.omega_in, &["S1dagS1", "S2dagS2", "C"], t_end)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidateOutput { point, tolerance: cfg.validate.tolerance, reports })
}

/// `out` with `suffix` inserted before the extension: `a/b.csv` -> `a/b.suffix.csv`.
pub fn sibling_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    out.with_file_name(name)
}

/// Named channels of a recorded series, for ad hoc inspection.
pub fn channel_maxima(series: &TimeSeries) -> BTreeMap<String, f64> {
    series.channels.keys().map(|k| (k.clone(), series.max(k))).collect()
}
