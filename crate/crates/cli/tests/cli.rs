use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lossjump::experiment::{read_metrics_csv, Manifest};
use lossjump::theory::{kernel_parts, KernelMethod, ParamDistribution};

const TINY: &str = r#"
[problem]
kind = "poisson_toy"

[network]
hidden_layers = [6]

[run]
seed = 3
checkpoint_every = 20

[test_grid]
n_x = 33

[metrics]
spectrum_every = 10
snapshot_epochs = [0, 30, 60]

[[phase]]
epochs = 30
loss = { kind = "data" }
lr = { base_lr = 1e-2 }
sampling = { interior = { scheme = "equidistant", n_x = 32, n_t = 1 } }

[[phase]]
epochs = 30
loss = { kind = "model", lambda_f = 1.0, lambda_h = 10.0, lambda_g = 10.0 }
lr = { base_lr = 1e-3 }
sampling = { interior = { scheme = "equidistant", n_x = 32, n_t = 1 } }
"#;

fn lossjump(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lossjump"))
        .args(args)
        .env("LOSSJUMP_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn tiny_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("tiny.cfg");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn bundled_config_runs_end_to_end() {
    let root = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/poisson_switch.cfg");
    let o = lossjump(&["run", cfg], root.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = root.path().join("poisson_switch");
    for f in ["metrics.csv", "spectrum.csv", "snapshots.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(out.join("checkpoints/checkpoint_0022000.json").is_file());
    let m = Manifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(m.switch_events.len(), 1);
    assert_eq!(m.switch_events[0].epoch, 20000);
    assert_eq!(m.total_epochs, 22000);
}

#[test]
fn seed_override_is_recorded_and_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path(), TINY);
    let cfg = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        assert_eq!(code(&lossjump(&["run", cfg, "--seed", "7", "--out", out], root.path())), 0);
    }
    assert_eq!(code(&lossjump(&["run", cfg, "--out", "c"], root.path())), 0);
    let read = |d: &str| fs::read(root.path().join(d).join("metrics.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let m = Manifest::load(&root.path().join("a/manifest.json")).unwrap();
    assert_eq!(m.seed, 7);
    assert_eq!(m.config["run"]["seed"], 7);
    assert_eq!(m.config["metrics"]["cadence"], 10);
}

#[test]
fn rerun_from_manifest_is_bit_identical() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path(), TINY);
    assert_eq!(code(&lossjump(&["run", cfg.to_str().unwrap(), "--out", "first"], root.path())), 0);
    let manifest = root.path().join("first/manifest.json");
    let o = lossjump(&["run", manifest.to_str().unwrap(), "--out", "again"], root.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(root.path().join("first/metrics.csv")).unwrap(),
        fs::read(root.path().join("again/metrics.csv")).unwrap()
    );
    let rows = read_metrics_csv(&root.path().join("again/metrics.csv")).unwrap();
    assert_eq!(rows.last().unwrap().epoch, 60);
}

#[test]
fn config_errors_exit_2() {
    let root = tempfile::tempdir().unwrap();
    let missing = TINY.replace("kind = \"poisson_toy\"\n", "");
    let o = lossjump(&["run", tiny_config(root.path(), &missing).to_str().unwrap()], root.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("kind"));

    let typo = TINY.replace("lambda_h", "lambda_hh");
    let o = lossjump(&["run", tiny_config(root.path(), &typo).to_str().unwrap()], root.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let bad_problem = TINY.replace("poisson_toy", "poisson");
    let o = lossjump(&["run", tiny_config(root.path(), &bad_problem).to_str().unwrap()], root.path());
    assert_eq!(code(&o), 2);

    let zero = TINY.replace("epochs = 30\nloss = { kind = \"data\" }", "epochs = 0\nloss = { kind = \"data\" }");
    assert_eq!(code(&lossjump(&["run", tiny_config(root.path(), &zero).to_str().unwrap()], root.path())), 2);
}

#[test]
fn divergence_exits_3_with_checkpoint() {
    let root = tempfile::tempdir().unwrap();
    let text = TINY.replace("base_lr = 1e-2", "base_lr = 1e300");
    let o = lossjump(&["run", tiny_config(root.path(), &text).to_str().unwrap(), "--out", "div"], root.path());
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find(|l| l.starts_with("last checkpoint: ")).expect("checkpoint path");
    assert!(Path::new(line.trim_start_matches("last checkpoint: ")).is_file());
}

#[test]
fn spectrum_recomputed_from_snapshots_matches_logged() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path(), TINY);
    assert_eq!(code(&lossjump(&["run", cfg.to_str().unwrap(), "--out", "s"], root.path())), 0);
    let dir = root.path().join("s");
    assert_eq!(code(&lossjump(&["spectrum", dir.to_str().unwrap()], root.path())), 0);
    let logged = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let again = fs::read_to_string(dir.join("spectrum_snapshots.csv")).unwrap();
    for epoch in ["0", "30", "60"] {
        let pick = |t: &str| -> Vec<String> {
            t.lines().filter(|l| l.split(',').next() == Some(epoch)).map(String::from).collect()
        };
        let a = pick(&logged);
        assert!(!a.is_empty());
        let b = pick(&again);
        assert_eq!(&a[..b.len()], &b[..], "epoch {epoch}");
    }
}

#[test]
fn sweep_writes_disjoint_directories() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path(), TINY);
    let o = lossjump(&["run", cfg.to_str().unwrap(), "--out", "sw", "--sweep", "1,2"], root.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for s in [1, 2] {
        let m = Manifest::load(&root.path().join(format!("sw/seed_{s}/manifest.json"))).unwrap();
        assert_eq!(m.seed, s);
    }
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn theory_defaults_and_peaks() {
    let root = tempfile::tempdir().unwrap();
    assert_eq!(code(&lossjump(&["theory", "--out", "th"], root.path())), 0);
    let peaks = read_csv(&root.path().join("th/rate_peaks.csv"));
    assert_eq!(peaks.len(), 8);
    for row in &peaks {
        let n: u32 = row[0].parse().unwrap();
        assert_eq!(row[1].is_empty(), n <= 2, "n = {n}");
    }
    let table = read_csv(&root.path().join("th/theory.csv"));
    assert_eq!(table.len(), 100);
    assert_eq!(table[0].len(), 3 + 8);
    for n in 3..=7usize {
        let col: Vec<f64> = table.iter().map(|r| r[3 + n].parse().unwrap()).collect();
        let arg = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        assert!(arg > 0 && arg < col.len() - 1, "n = {n} has no interior maximum on the grid");
    }
}

#[test]
fn theory_gamma_zero_keeps_residual_term() {
    let root = tempfile::tempdir().unwrap();
    let args = ["theory", "--gamma", "0", "--xi-min", "0.5", "--xi-max", "2", "--xi-count", "4", "--out", "g0"];
    assert_eq!(code(&lossjump(&args, root.path())), 0);
    for row in read_csv(&root.path().join("g0/theory.csv")) {
        let xi: f64 = row[0].parse().unwrap();
        let sol: f64 = row[2].parse().unwrap();
        let parts = kernel_parts(xi, &ParamDistribution::default(), KernelMethod::Quadrature { nodes: 1024 }).unwrap();
        assert_eq!(sol, parts.solution_residual.value);
    }
}

#[test]
fn theory_compare_and_invalid_grid() {
    let root = tempfile::tempdir().unwrap();
    let args = [
        "theory", "--xi-min", "0.5", "--xi-max", "2", "--xi-count", "2", "--compare", "--samples", "200000", "--out",
        "cmp",
    ];
    let o = lossjump(&args, root.path());
    assert_eq!(code(&o), 0);
    let rows = read_csv(&root.path().join("cmp/theory_compare.csv"));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let z: f64 = r[5].parse().unwrap();
        assert!(z.abs() < 4.0, "{r:?}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("monte carlo"));
    assert_eq!(code(&lossjump(&["theory", "--xi-min", "-1"], root.path())), 2);
    assert_eq!(code(&lossjump(&["theory", "--xi-min", "3", "--xi-max", "2"], root.path())), 2);
    assert_eq!(code(&lossjump(&["theory", "--xi-count", "1"], root.path())), 2);
}

#[test]
fn check_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let ok = lossjump(&["check"], root.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = lossjump(&["check", "--inject-fault"], root.path());
    let out = String::from_utf8_lossy(&bad.stdout);
    let failures = out.lines().filter(|l| l.starts_with("FAIL")).count() as i32;
    assert!(failures >= 1);
    assert_eq!(code(&bad), failures);
    assert!(out.contains("FAIL gradient_oracle"));
}
