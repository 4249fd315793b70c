use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SIM_CONFIG: &str = r#"{
  "seed": 7,
  "simulation": {
    "n": 100,
    "p": 2,
    "true_model": {
      "baseline": {"kind": "constant", "rate": 1.0},
      "risk": {"kind": "zero"},
      "censoring": {"kind": "exponential", "rate": 0.3}
    }
  },
  "dictionary": {"family": "bspline", "d": 5, "domain": [0, 1]},
  "penalty": {"lambda": 0.05}
}"#;

fn strucox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strucox")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_dataset_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", SIM_CONFIG);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = strucox(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read_to_string(a.join("dataset.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[0].contains(",seed=7,"));
    assert_eq!(lines[1], "time,event,x1,x2");
    assert_eq!(lines.len(), 102);
    assert_eq!(text, fs::read_to_string(b.join("dataset.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("dataset.json")).unwrap(),
        fs::read(b.join("dataset.json")).unwrap()
    );
    let side = read_json(&a.join("dataset.json"));
    assert_eq!(side["summary"]["n"], 100);
    assert_eq!(side["seed"], 7);
}

#[test]
fn seed_flag_changes_the_sample() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", SIM_CONFIG);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    strucox(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]);
    strucox(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "8"]);
    let body = |p: &Path| fs::read_to_string(p.join("dataset.csv")).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_ne!(body(&a), body(&b));
}

#[test]
fn invalid_simulation_exits_2_naming_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", &SIM_CONFIG.replace("\"n\": 100", "\"n\": 0"));
    let o = strucox(&["simulate", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"), "{}", stderr(&o));
    assert!(!tmp.path().join("dataset.csv").exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", r#"{"sead": 1}"#);
    let o = strucox(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sead"));
}

#[test]
fn fit_after_simulate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.json", SIM_CONFIG);
    let out = tmp.path().to_str().unwrap();
    assert_eq!(strucox(&["simulate", "--config", &cfg, "--out", out]).status.code(), Some(0));
    let data = tmp.path().join("dataset.csv");
    let o = strucox(&["fit", "--config", &cfg, "--data", data.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("fit.json"));
    assert_eq!(r["result"]["converged"], true);
    assert_eq!(r["result"]["beta_hat"].as_array().unwrap().len(), 10);
    assert_eq!(r["lambda"], 0.05);
    assert_eq!(r["seed"], 7);
}

#[test]
fn lambda_grid_writes_one_report_per_value() {
    let tmp = TempDir::new().unwrap();
    let sim = write(tmp.path(), "run.json", SIM_CONFIG);
    let out = tmp.path().to_str().unwrap();
    strucox(&["simulate", "--config", &sim, "--out", out]);
    let cfg = write(
        tmp.path(),
        "grid.json",
        &SIM_CONFIG.replace("\"lambda\": 0.05", "\"lambda_grid\": [0.01, 0.1, 0.05]"),
    );
    let data = tmp.path().join("dataset.csv");
    let o = strucox(&["fit", "--config", &cfg, "--data", data.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lambdas: Vec<f64> = (0..3)
        .map(|k| read_json(&tmp.path().join(format!("fit_{k:03}.json")))["lambda"].as_f64().unwrap())
        .collect();
    assert_eq!(lambdas, vec![0.1, 0.05, 0.01]);
    assert!(!tmp.path().join("fit_003.json").exists());
}

const TINY_DICT: &str = r#""dictionary": {"family": "polynomial", "d": 2, "domain": [0, 1]}"#;

#[test]
fn large_lambda_on_three_rows_gives_zero() {
    let tmp = TempDir::new().unwrap();
    let data = write(tmp.path(), "tiny.csv", "time,event,x1\n1,1,0.2\n2,0,0.9\n3,1,0.4\n");
    let cfg = write(tmp.path(), "cfg.json", &format!(r#"{{{TINY_DICT}, "penalty": {{"lambda": 10.0}}}}"#));
    let o = strucox(&["fit", "--config", &cfg, "--data", &data, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("fit.json"));
    assert!(r["result"]["beta_hat"].as_array().unwrap().iter().all(|b| b.as_f64() == Some(0.0)));
    assert_eq!(r["result"]["active_groups"].as_array().unwrap().len(), 0);
}

#[test]
fn separable_data_without_penalty_exits_3() {
    let tmp = TempDir::new().unwrap();
    let data = write(tmp.path(), "sep.csv", "time,event,x1\n1,1,0.9\n2,1,0.5\n3,1,0.1\n");
    let cfg = write(tmp.path(), "cfg.json", &format!(r#"{{{TINY_DICT}, "penalty": {{"lambda": 0.0}}}}"#));
    let o = strucox(&["fit", "--config", &cfg, "--data", &data, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("fit.json"));
    assert_eq!(r["result"]["converged"], false);
}

#[test]
fn malformed_dataset_exits_2() {
    let tmp = TempDir::new().unwrap();
    let data = write(tmp.path(), "bad.csv", "time,event,x1\n1,1,0.9\n2,yes,0.5\n");
    let cfg = write(tmp.path(), "cfg.json", &format!(r#"{{{TINY_DICT}, "penalty": {{"lambda": 0.1}}}}"#));
    let o = strucox(&["fit", "--config", &cfg, "--data", &data]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn two_lambda_sources_exit_2() {
    let tmp = TempDir::new().unwrap();
    let data = write(tmp.path(), "tiny.csv", "time,event,x1\n1,1,0.2\n2,0,0.9\n3,1,0.4\n");
    let cfg = write(
        tmp.path(),
        "cfg.json",
        &format!(r#"{{{TINY_DICT}, "penalty": {{"lambda": 0.1, "lambda_grid": [0.1]}}}}"#),
    );
    let o = strucox(&["fit", "--config", &cfg, "--data", &data]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_suite_exits_2() {
    let o = strucox(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sandwich"));
}

#[test]
fn verify_writes_report() {
    let tmp = TempDir::new().unwrap();
    let o = strucox(&["verify", "prop1", "--out", tmp.path().to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("prop1: PASS"));
    let r = read_json(&tmp.path().join("verify_prop1.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["seed"], 3);
    assert_eq!(r["report"]["single_subject_min"], 1.0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(strucox(&[]).status.code(), Some(2));
    assert_eq!(strucox(&["fit"]).status.code(), Some(2));
    assert_eq!(strucox(&["--version"]).status.code(), Some(0));
}
