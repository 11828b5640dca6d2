use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
# Reduced model: dim 16, pulse width 150, rates scaled up to match.
[subsystem]
n_fock = 20
n_keep = 4

[cascade]
kappa1 = 0.04
kappa2 = 0.01

[pulse]
duration = 150.0

[integrator]
sample_every = 5.0

[spectrum]
grid = "1.1:1.3:81"
levels = 8

[correlation]
points = 40

[validate]
kappa_s = [0.03]
"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("usc-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_usc-cascade"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Data rows of a CSV with `#` header lines.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_writes_levels_and_crossings_deterministically() {
    let dir = scratch("spectrum");
    let out = dir.join("spec.csv");
    let o = out.to_str().unwrap();
    let r = run(&["spectrum", "--grid", "1.1:1.3:81", "--levels", "6", "--out", o], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let first = std::fs::read(&out).unwrap();
    let table = rows(&out);
    assert_eq!(table[0][..3], ["omega_c", "level_0", "level_1"]);
    assert_eq!(table[0].len(), 1 + 6 + 12);
    assert_eq!(table.len(), 82);
    let crossings = rows(&dir.join("spec.crossings.csv"));
    assert_eq!(crossings.len(), 3);
    assert_eq!(crossings[1][..2], ["4", "5"]);
    assert_eq!(crossings[2][..2], ["3", "4"]);
    let text = String::from_utf8_lossy(&first);
    assert!(text.contains("# grid_sha256 = "));
    assert!(text.contains("# config:"));

    let r = run(&["spectrum", "--grid", "1.1:1.3:81", "--levels", "6", "--out", o, "--workers", "2"], &[]);
    assert!(r.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn uncoupled_spectrum_has_empty_crossing_summary() {
    let dir = scratch("uncoupled");
    let out = dir.join("spec.csv");
    let r = run(
        &["spectrum", "--grid", "1.2:3.0:37", "--out", out.to_str().unwrap()],
        &[("USC_SUBSYSTEM__ETA", "0.0"), ("USC_SUBSYSTEM__THETA", "0.0")],
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(rows(&dir.join("spec.crossings.csv")).len(), 1);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = scratch("badconfig");
    let cfg = write_config(&dir, "[cascade]\nkappa_one = 0.1\n");
    assert_eq!(run(&["spectrum", "--config", &cfg], &[]).status.code(), Some(2));
    assert_eq!(run(&["spectrum"], &[("USC_PULSE__WIDTH", "3")]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--config", "/nonexistent/run.toml"], &[]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--grid", "1:2"], &[]).status.code(), Some(2));
}

#[test]
fn missing_crossing_exits_with_4() {
    let r = run(&["dynamics"], &[("USC_SPECTRUM__GRID", "1.5:3.0:31")]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn vacuum_dynamics_is_zero() {
    let dir = scratch("vacuum");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("dyn.csv");
    let r = run(&["dynamics", "--vacuum", "--config", &cfg, "--out", out.to_str().unwrap()], &[("USC_INTEGRATOR__T_END", "200.0")]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = rows(&out);
    assert_eq!(table[0], ["t", "S1dagS1", "S2dagS2", "C_equal_time", "pulse_envelope"]);
    for row in &table[1..] {
        for cell in &row[1..] {
            assert!(cell.parse::<f64>().unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn dynamics_shows_delayed_downstream_peak() {
    let dir = scratch("dynamics");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("dyn.csv");
    let r = run(&["dynamics", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = rows(&out);
    let argmax = |col: usize| {
        table[1..]
            .iter()
            .max_by(|a, b| a[col].parse::<f64>().unwrap().total_cmp(&b[col].parse::<f64>().unwrap()))
            .map(|r| r[0].parse::<f64>().unwrap())
            .unwrap()
    };
    assert!(argmax(2) > argmax(1));
    // Envelope exported as sqrt(T) |xi|, peaking at (2/pi)^(1/4).
    let env_peak = table[1..].iter().map(|r| r[4].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!((env_peak - (2.0 / std::f64::consts::PI).powf(0.25)).abs() < 1e-3);
}

#[test]
fn correlation_header_records_parameters() {
    let dir = scratch("correlation");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("c.csv");
    let r = run(&["correlation", "--delay", "1", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# tau_d = 1.5e2"));
    assert!(text.contains("# G = 1e0"));
    assert!(text.contains("# gamma = "));
    assert_eq!(rows(&out)[0], ["t", "C"]);
}

#[test]
fn sweep_rows_are_independent() {
    let dir = scratch("sweep");
    let cfg = write_config(&dir, SMALL);
    let both = dir.join("both.csv");
    let one = dir.join("one.csv");
    let r = run(&["sweep", "--axis", "gain", "--grid", "0.5:1.0:2", "--config", &cfg, "--out", both.to_str().unwrap()], &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let r = run(&["sweep", "--axis", "gain", "--grid", "1.0:1.0:1", "--config", &cfg, "--out", one.to_str().unwrap()], &[]);
    assert!(r.status.success());
    let (a, b) = (rows(&both), rows(&one));
    assert_eq!(a[0], ["gain", "c_max", "omega_in"]);
    assert_eq!(a[2], b[1]);
    let c = |row: &Vec<String>| row[1].parse::<f64>().unwrap();
    assert!(c(&a[1]) < c(&a[2]));
}

#[test]
fn unknown_axis_is_rejected() {
    let r = run(&["sweep", "--axis", "temperature"], &[]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn validate_reports_pass() {
    let dir = scratch("validate");
    let cfg = write_config(&dir, SMALL);
    let out = dir.join("v.csv");
    let r = run(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(r.status.success(), "{stderr}");
    assert!(stderr.contains("validate: PASS"));
    let table = rows(&out);
    assert_eq!(table.len(), 4);
    assert!(table[1..].iter().all(|r| r.last().unwrap() == "PASS"));
}
