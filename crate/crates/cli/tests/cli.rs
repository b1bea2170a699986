use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cma-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CMA_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_example_passes() {
    let dir = TempDir::new().unwrap();
    let out = lab(&["verify", "--family", "pogorelov2", "--eps", "0.3", "--points", "100", "--seed", "7"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("verify.json"));
    assert!(report["max_gap"].as_f64().unwrap() < 1e-10);
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["options"]["points"], 100);
}

#[test]
fn moser_example_product_column() {
    let dir = TempDir::new().unwrap();
    let out = lab(&["moser", "--n", "2", "--a", "1", "--kmax", "60"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("moser.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "b_product").unwrap();
    let last = csv.lines().last().unwrap();
    let value: f64 = last.split(',').nth(col).unwrap().parse().unwrap();
    assert!((value - 2.0).abs() < 1e-6, "{value}");
    assert_eq!(csv.lines().count(), 61);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = TempDir::new().unwrap();
    let out = lab(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    // randomized without a seed
    assert_eq!(lab(&["verify"], dir.path()).status.code(), Some(2));
    // family without a right-hand side
    assert_eq!(lab(&["verify", "--family", "blocki", "--seed", "1"], dir.path()).status.code(), Some(2));
    // singular evaluation point
    let out = lab(&["hessian", "--point=0.5,0.5,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    // missing and malformed config files
    assert_eq!(lab(&["moser", "--config", "/nonexistent.json"], dir.path()).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"kmax": 10, "typo": 1}"#).unwrap();
    assert_eq!(lab(&["moser", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
    fs::write(&bad, r#"{"subcommand": "verify"}"#).unwrap();
    assert_eq!(lab(&["moser", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(lab(&["moser", "--threads", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one_with_report() {
    let dir = TempDir::new().unwrap();
    let out = lab(&["verify", "--seed", "3", "--points", "20", "--tol", "1e-300"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let failure = json(&dir.path().join("failure.json"));
    assert_eq!(failure["subcommand"], "verify");
    assert!(failure["invariant"].as_str().unwrap().contains("det"));
    // the regular outputs are still written
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"subcommand": "verify", "seed": 11, "points": 50, "eps": 0.05}"#).unwrap();
    let out = lab(&["verify", "--config", cfg.to_str().unwrap(), "--points", "20"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["options"]["points"], 20);
    assert_eq!(report["options"]["seed"], 11);
    assert_eq!(report["family"]["eps"], 0.05);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let runs: [&[&str]; 3] = [
        &["verify", "--seed", "5", "--points", "200", "--family", "pogorelov-n", "--dim", "4", "--eps", "0.1"],
        &["moser", "--n", "3", "--a", "3", "--kmax", "40"],
        &["viscosity", "--seed", "9", "--attempts", "50", "--candidates", "20", "--samples", "1000", "--base-points", "2"],
    ];
    for args in runs {
        assert_eq!(lab(args, a.path()).status.code(), Some(0));
        let mut threaded = args.to_vec();
        threaded.extend(["--threads", "1"]);
        assert_eq!(lab(&threaded, b.path()).status.code(), Some(0));
    }
    for name in ["verify.json", "moser.csv", "moser.json", "viscosity.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn threads_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cma-lab"))
        .args(["moser", "--kmax", "5", "--out"])
        .arg(dir.path())
        .env("CMA_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_cma-lab"))
        .args(["moser", "--kmax", "5", "--out"])
        .arg(dir.path())
        .env("CMA_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_solve_and_probe() {
    let dir = TempDir::new().unwrap();
    let out = lab(&["solve", "--points", "9", "--nested", "--write-solution"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("solve.json"));
    assert_eq!(report["report"]["converged"], Value::Bool(true));
    assert!(report["coarse"].is_object());
    assert!(dir.path().join("solution.json").exists());

    let cfg = dir.path().join("probe.json.in");
    fs::write(
        &cfg,
        r#"{"family": "pogorelov2", "base_points": 21,
            "probe": {"convergence_points": 9, "lipschitz": {"points": 2001}}}"#,
    )
    .unwrap();
    let out = lab(&["probe", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("probe.json"));
    assert_eq!(report["w2p_scan"]["entries"].as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(dir.path().join("probe.csv")).unwrap();
    assert!(csv.starts_with("measurement,parameter,value"));
    assert!(csv.lines().any(|l| l.starts_with("w2p_slope,")));
}

#[test]
fn hessian_report_for_smooth_family() {
    let dir = TempDir::new().unwrap();
    let out = lab(&["hessian", "--family", "pogorelov2", "--eps", "1", "--point=0,0,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("hessian.json"));
    assert!((report["det_fd"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(report["max_abs_diff"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["psd"]["is_pd"], Value::Bool(true));
}
