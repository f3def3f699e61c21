use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qseal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qseal"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn seal_then_check_is_unread() {
    let dir = tempfile::tempdir().unwrap();
    let sealed = dir.path().join("sealed.json");
    let out = qseal(&["--seed", "5", "--out", path_str(&sealed), "seal", "--n", "24", "--theta", "0.2", "--alpha", "0.25"]);
    assert!(out.status.success());
    let v = stdout_json(&qseal(&["--seed", "5", "check", "--in", path_str(&sealed)]));
    assert_eq!(v["verdict"], "UNREAD");
    assert_eq!(v["per_qubit_pass"].as_array().unwrap().len(), 24);
}

#[test]
fn seal_read_check_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let sealed = dir.path().join("sealed.json");
    let public = dir.path().join("public.json");
    let out = qseal(&[
        "--out", path_str(&sealed), "seal", "--theta", "0.1", "--alpha", "0.25",
        "--bits", "1011001110001111", "--public-out", path_str(&public),
    ]);
    assert!(out.status.success());
    let record: Value = serde_json::from_str(&std::fs::read_to_string(&public).unwrap()).unwrap();
    assert!(record.get("bits").map_or(true, Value::is_null));

    let out = qseal(&["--seed", "1", "read", "--in", path_str(&sealed)]);
    assert!(out.status.success());
    let read = String::from_utf8(out.stdout).unwrap();
    let read = read.trim();
    assert_eq!(read.len(), 16);
    assert!(read.chars().all(|c| c == '0' || c == '1'));

    let v = stdout_json(&qseal(&["--seed", "1", "check", "--in", path_str(&sealed)]));
    assert!(v["verdict"] == "READ" || v["verdict"] == "UNREAD");
}

#[test]
fn randomized_commands_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert!(qseal(&["--seed", "42", "--out", path_str(p), "seal", "--n", "8", "--theta", "0.2", "--alpha", "0.3"]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn analytic_examples() {
    let v = stdout_json(&qseal(&["analytic", "eq5", "--n", "8", "--m", "16"]));
    assert_eq!(v["value"].as_f64(), Some(4.0));
    assert_eq!(v["formula"], "eq5");

    let v = stdout_json(&qseal(&["analytic", "eq3", "--theta", "0"]));
    assert_eq!(v["value"].as_f64(), Some(1.0));

    let eq1 = stdout_json(&qseal(&["analytic", "eq1", "--theta", "0.05", "--theta-prime", "0"]));
    let eq3 = stdout_json(&qseal(&["analytic", "eq3", "--theta", "0.05"]));
    let (x, y) = (eq1["value"].as_f64().unwrap(), eq3["value"].as_f64().unwrap());
    assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
}

#[test]
fn analytic_rejects_bad_input() {
    assert_eq!(qseal(&["analytic", "eq42"]).status.code(), Some(1));
    assert_eq!(qseal(&["analytic", "eq3", "--theta", "1.0"]).status.code(), Some(1));
}

#[test]
fn demo_recovers_the_secret() {
    let v = stdout_json(&qseal(&["--seed", "3", "demo", "--bit", "1"]));
    assert_eq!(v["decoded"]["secret_bit"], true);
    let v = stdout_json(&qseal(&["--seed", "3", "demo", "--bit", "0", "--no-read"]));
    assert_eq!(v["verdict"], "UNREAD");
}

#[test]
fn bundled_check_rate_config_passes_assertions() {
    for name in ["single_qubit_check_rate.json", "single_qubit_check_rate.toml"] {
        let dir = tempfile::tempdir().unwrap();
        let out_path = dir.path().join("reports.jsonl");
        let config = configs_dir().join(name);
        let out = qseal(&["--assert", "--out", path_str(&out_path), "experiment", path_str(&config)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(&out_path).unwrap();
        let report: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(report["trials"].as_u64(), Some(1_000_000));
    }
}

#[test]
fn experiment_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"params": {"n": 4, "theta": 0.3, "alpha": 0.25, "seed": 1},
            "strategy": {"type": "individual", "k": 1}, "trials": 500,
            "sweep": {"variable": "k", "values": [1, 2]}}"#,
    )
    .unwrap();
    let out = qseal(&["--format", "csv", "experiment", path_str(&config)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("sweep_variable,sweep_value,estimate,ci_low,ci_high,analytic_ref,bit_error_rate")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"params": {"n": 4}, "trials": "many"}"#).unwrap();
    let out = qseal(&["experiment", path_str(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn wrong_reference_under_assert_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("wrong.json");
    std::fs::write(
        &config,
        r#"{"params": {"n": 1, "theta": 0.3, "alpha": 0.25, "seed": 2},
            "strategy": {"type": "honest"}, "trials": 20000, "pin_theta": 0.3,
            "analytic_ref_override": 0.5}"#,
    )
    .unwrap();
    let out = qseal(&["--assert", "experiment", path_str(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let out = qseal(&["experiment", path_str(&config)]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(qseal(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qseal(&["seal", "--n", "0", "--theta", "0.2", "--alpha", "0.25"]).status.code(), Some(1));
    assert_eq!(qseal(&["check", "--in", "/nonexistent/sealed.json"]).status.code(), Some(1));
    assert_eq!(qseal(&["--help"]).status.code(), Some(0));
}
