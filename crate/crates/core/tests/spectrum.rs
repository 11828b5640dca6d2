use usc_cascade::experiment::{cmd_spectrum, RunConfig};
use usc_cascade::spectrum::{scan_spectrum, BareTag};
use usc_cascade::composite::CascadeParams;
use usc_cascade::subsystem::SubsystemSpec;

fn config(grid: &str) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.spectrum.grid = grid.into();
    cfg
}

#[test]
fn uncoupled_scan_has_no_avoided_crossings() {
    let mut cfg = config("1.1:3.0:96");
    cfg.subsystem.eta = 0.0;
    cfg.subsystem.theta = 0.0;
    let out = cmd_spectrum(&cfg).unwrap();
    assert!(out.crossings.is_empty());
    // Levels are sums of bare energies, up to the tiny cascade splitting.
    let p = out.table.points[50].as_ref().unwrap();
    let w = out.table.grid[50];
    assert!((p.energies[0] + 1.0).abs() < 1e-12);
    assert!(p.energies.iter().any(|e| (e - (-1.0 + w)).abs() < 1e-2));
    assert_eq!(p.labels[0], ("gg00".to_string(), 1.0));
}

#[test]
fn default_scan_finds_both_crossings_near_resonance() {
    let out = cmd_spectrum(&config("1.1:1.3:81")).unwrap();
    let pairs: Vec<(usize, usize)> = out.crossings.iter().map(|c| (c.lower, c.upper)).collect();
    assert_eq!(pairs, vec![(4, 5), (3, 4)]);
    for c in &out.crossings {
        assert!(c.gap > 1e-4 && c.gap < 1e-3, "{c:?}");
    }
    assert!((out.crossings[0].omega_c - 1.18243).abs() < 1e-4);
}

#[test]
fn level_repulsion_and_ordering() {
    let spec = SubsystemSpec::new(1.1, 0.5, std::f64::consts::PI / 5.0);
    let grid: Vec<f64> = (0..61).map(|k| 1.17 + 0.0005 * k as f64).collect();
    let t = scan_spectrum(&spec, &spec, &CascadeParams::new(0.004, 0.001), &grid, 8).unwrap();
    assert!(t.gaps(4, 5).iter().all(|g| *g > 1e-4));
    for p in &t.points {
        let p = p.as_ref().unwrap();
        assert!(p.energies.windows(2).all(|w| w[0] <= w[1]));
        for (_, w) in &p.labels {
            assert!((0.0..=1.0 + 1e-12).contains(w));
        }
    }
}

#[test]
fn product_weights_sum_to_at_most_one() {
    let spec = SubsystemSpec::new(1.5, 0.5, std::f64::consts::PI / 5.0);
    let t = scan_spectrum(&spec, &spec, &CascadeParams::new(0.004, 0.001), &[1.5], 8).unwrap();
    let p = t.points[0].as_ref().unwrap();
    for v in &p.states {
        let total: f64 = p
            .dictionary
            .weights(v)
            .iter()
            .filter(|(name, _)| BareTag::parse(name).is_some())
            .map(|(_, w)| w)
            .sum();
        assert!(total <= 1.0 + 1e-12, "{total}");
    }
}

#[test]
fn crossing_is_stable_under_grid_refinement() {
    let spec = SubsystemSpec::new(1.1, 0.5, std::f64::consts::PI / 5.0);
    let params = CascadeParams::new(0.004, 0.001);
    let locate = |n: usize| {
        let grid: Vec<f64> = (0..n).map(|k| 1.175 + 0.015 * k as f64 / (n - 1) as f64).collect();
        let t = scan_spectrum(&spec, &spec, &params, &grid, 8).unwrap();
        (t.find_avoided_crossing(4, 5).unwrap(), grid[1] - grid[0])
    };
    let (coarse, step) = locate(31);
    let (fine, _) = locate(61);
    assert!((coarse.omega_c - fine.omega_c).abs() < step);
}

#[test]
fn labels_are_continuous_away_from_crossings() {
    let cfg = config("1.3:3.0:35");
    let out = cmd_spectrum(&cfg).unwrap();
    for level in [0, 3] {
        let tags: Vec<&str> = out.table.points.iter().map(|p| p.as_ref().unwrap().labels[level].0.as_str()).collect();
        assert!(tags.iter().all(|t| *t == tags[0]), "level {level}: {tags:?}");
    }
}

#[test]
fn spectrum_csv_is_deterministic() {
    let cfg = config("1.15:1.25:21");
    let a = cmd_spectrum(&cfg).unwrap();
    let b = cmd_spectrum(&cfg).unwrap();
    assert_eq!(a.levels_table(&cfg).to_string(), b.levels_table(&cfg).to_string());
    assert_eq!(a.crossings_table(&cfg).to_string(), b.crossings_table(&cfg).to_string());
}

#[test]
fn boundary_minimum_demands_wider_grid() {
    let spec = SubsystemSpec::new(1.1, 0.5, std::f64::consts::PI / 5.0);
    let grid: Vec<f64> = (0..11).map(|k| 1.19 + 0.01 * k as f64).collect();
    let t = scan_spectrum(&spec, &spec, &CascadeParams::new(0.004, 0.001), &grid, 8).unwrap();
    assert!(matches!(t.find_avoided_crossing(4, 5), Err(usc_cascade::Error::Crossing(_))));
}
