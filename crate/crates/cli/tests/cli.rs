use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pns"))
        .args(args)
        .env("PNS_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("sweep.toml");
    fs::write(&path, body).unwrap();
    path
}

const SWEEP: &str = r#"
[experiment]
output = "out/rows.csv"
seed = 7
replications = 2
budgets = [1000, 5000]
methods = ["mh", "rf", "unbiased_pns"]
metrics = ["tvd"]

[model]
kind = "triangle"

[scheme]
kind = "systematic"
set_size = 1
window = 10
"#;

#[test]
fn version_prints_crate_version() {
    let out = pns(&["version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim(), format!("pns {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn exact_triangle_dumps_distribution() {
    let out = pns(&["exact", "triangle"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,state,probability");
    assert_eq!(lines.len(), 4);
    let probs: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    for (p, want) in probs.iter().zip([1.0 / 6.0, 1.0 / 3.0, 0.5]) {
        assert!((p - want).abs() < 1e-15);
    }
}

#[test]
fn exact_hypercube_sums_to_one() {
    let out = pns(&["exact", "hypercube16"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = text.lines().skip(1).count();
    assert_eq!(rows, 16);
    let total: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn bad_model_spec_exits_2() {
    let out = pns(&["exact", "pentagon"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn run_writes_full_grid_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SWEEP);
    let out = pns(&["run", config.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = dir.path().join("out/rows.csv");
    let first = fs::read_to_string(&csv).unwrap();
    assert!(!dir.path().join("out/rows.partial").exists());
    // 3 methods x 2 budgets x 2 replications x 1 metric
    assert_eq!(first.lines().count(), 1 + 12);

    assert!(pns(&["run", config.to_str().unwrap()]).status.success());
    let second = fs::read_to_string(&csv).unwrap();
    let strip = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| {
                let mut cols: Vec<&str> = l.split(',').collect();
                // cpu_seconds, burn_in_seconds
                cols.drain(8..10);
                cols.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn empty_budgets_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SWEEP.replace("[1000, 5000]", "[]"));
    let out = pns(&["run", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bias_metric_on_discrete_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let body = SWEEP.replace("metrics = [\"tvd\"]", "metrics = [\"bias_first\"]");
    let config = write_config(dir.path(), &body);
    let out = pns(&["run", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_1() {
    let out = pns(&["run", "/nonexistent/sweep.toml"]);
    assert_eq!(out.status.code(), Some(1));
}
