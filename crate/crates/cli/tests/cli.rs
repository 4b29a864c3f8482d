use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ssh-bell");

const SMALL: &str = r#"
[lattice]
cells = 40

[[profile]]
kind = "step"
eta_i = 0.5
eta_f = -0.5
t_c_inv_v = 5.0

[pair]
k0_pi_units = 0.5
dk_pi_units = 0.1
kw_pi_units = 0.3

[evolution]
dt_inv_v = 0.01
t_end_inv_v = 10.0
record_interval_inv_v = 5.0
"#;

const NOISE: &str = r#"
[noise]
zeta_v = [0.0, 0.05]
xi_v = [0.0, 0.05]
trials = 4
seed = 11
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn with_config(text: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), text).unwrap();
    dir
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = with_config(&format!("{SMALL}\n[measure]\ndensity = true\ncolour = 1\n"));
    let out = run(dir.path(), &["scatter", "--config", "run.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_section_is_a_config_error() {
    let dir = with_config(SMALL);
    let out = run(dir.path(), &["decohere", "--config", "run.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_preset_parses() {
    let dir = TempDir::new().unwrap();
    let list = run(dir.path(), &["preset", "--list"]);
    assert!(list.status.success());
    let names = String::from_utf8(list.stdout).unwrap();
    assert_eq!(names.lines().count(), 9);
    for name in names.lines() {
        let shown = run(dir.path(), &["preset", name]);
        assert!(shown.status.success(), "{name}");
        let text = String::from_utf8(shown.stdout).unwrap();
        assert!(text.parse::<toml::Table>().is_ok(), "{name}");
    }
    assert_eq!(run(dir.path(), &["preset", "nope"]).status.code(), Some(2));
}

#[test]
fn scatter_writes_outputs_and_manifest() {
    let dir = with_config(SMALL);
    let out = run(dir.path(), &["scatter", "--config", "run.toml", "--out", "o", "--oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("o");
    for f in ["entropy_time.csv", "density.csv", "projection_0.json", "projection_0_12.csv", "manifest.json"] {
        assert!(root.join(f).exists(), "{f}");
    }
    let rows = read_csv(&root.join("entropy_time.csv"));
    assert_eq!(rows[0][6], "entropy");
    // Before the boundary the projection is empty; after it a correlated pair appears.
    let last = rows.last().unwrap();
    let p: f64 = last[5].parse().unwrap();
    let s: f64 = last[6].parse().unwrap();
    assert!(p > 0.1 && s > 0.5, "p = {p}, s = {s}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "scatter");
    assert_eq!(manifest["config"]["lattice"]["cells"], 40);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = with_config(&format!("{SMALL}{NOISE}"));
    for o in ["a", "b"] {
        assert!(run(dir.path(), &["noise-sweep", "--config", "run.toml", "--out", o]).status.success());
    }
    for f in ["fidelity_mean.csv", "fidelity_std.csv", "fidelity_trials.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = with_config(&format!("{SMALL}{NOISE}"));
    for (o, w) in [("w1", "1"), ("w3", "3")] {
        assert!(run(dir.path(), &["noise-sweep", "--config", "run.toml", "--out", o, "--workers", w]).status.success());
    }
    let a = fs::read(dir.path().join("w1/fidelity_trials.csv")).unwrap();
    let b = fs::read(dir.path().join("w3/fidelity_trials.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noiseless_cell_has_unit_fidelity() {
    let dir = with_config(&format!("{SMALL}{NOISE}"));
    assert!(run(dir.path(), &["noise-sweep", "--config", "run.toml", "--out", "o"]).status.success());
    let mean = read_csv(&dir.path().join("o/fidelity_mean.csv"));
    let std = read_csv(&dir.path().join("o/fidelity_std.csv"));
    assert_eq!(mean[1][1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(std[1][1].parse::<f64>().unwrap(), 0.0);
    let noisy: f64 = mean[2][2].parse().unwrap();
    assert!(noisy < 1.0 && noisy > 0.9);
}

#[test]
fn seed_override_changes_noise_and_is_recorded() {
    let dir = with_config(&format!("{SMALL}{NOISE}"));
    assert!(run(dir.path(), &["noise-sweep", "--config", "run.toml", "--out", "a"]).status.success());
    assert!(run(dir.path(), &["noise-sweep", "--config", "run.toml", "--out", "b", "--seed", "12"]).status.success());
    let a = fs::read(dir.path().join("a/fidelity_trials.csv")).unwrap();
    let b = fs::read(dir.path().join("b/fidelity_trials.csv")).unwrap();
    assert_ne!(a, b);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("b/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 12);
}

#[test]
fn band_gap_at_the_zone_edge() {
    let dir = with_config("[lattice]\ncells = 40\n");
    assert!(run(dir.path(), &["bands", "--config", "run.toml", "--out", "o"]).status.success());
    let rows = read_csv(&dir.path().join("o/bands_initial.csv"));
    assert_eq!(rows[0][..3], ["k", "band_index", "energy"]);
    let at_edge: Vec<f64> = rows
        .iter()
        .skip(1)
        .filter(|r| (r[0].parse::<f64>().unwrap().abs() - std::f64::consts::PI).abs() < 1e-9)
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(at_edge.len(), 2);
    // Default w/v = 0.5 gives a gap of 2|v - w| = 1 at k = pi.
    assert!((at_edge[1] - at_edge[0] - 1.0).abs() < 1e-12, "{at_edge:?}");
}

#[test]
fn zero_workers_is_rejected() {
    let dir = with_config(SMALL);
    let out = run(dir.path(), &["scatter", "--config", "run.toml", "--out", "o", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
