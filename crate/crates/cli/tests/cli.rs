use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conical"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg(config).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn complex(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

const TRIPLE: &str = r#"{ "orders": [0.8, 0.8, 0.8] }"#;
const QUAD: &str = r#"{ "points": [[0.3, 0.0]], "orders": [0.7, 0.7, 0.7, 0.7] }"#;

#[test]
fn solve_three_points_reports_forced_values() {
    let dir = TempDir::new().unwrap();
    let r = json(&run(&["solve"], &write(&dir, "t.json", TRIPLE)));
    let acc = &r["accessories"];
    assert_eq!(acc["solver_skipped"], Value::Bool(true));
    let vals: Vec<(f64, f64)> = acc["values"].as_array().unwrap().iter().map(complex).collect();
    for (got, want) in vals.iter().zip([0.48, -0.48, 0.48]) {
        assert!((got.0 - want).abs() < 1e-14 && got.1.abs() < 1e-14);
    }
    assert_eq!(r["config"]["orders"], serde_json::json!([0.8, 0.8, 0.8]));
}

#[test]
fn solve_symmetric_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.json", r#"{ "points": [[0.5, 0.0]], "orders": [0.7, 0.7, 0.7, 0.7] }"#);
    let r = json(&run(&["solve"], &cfg));
    let (re, im) = complex(&r["accessories"]["values"][0]);
    assert!(re.hypot(im) < 1e-6);
    assert_eq!(r["accessories"]["signature"], "positive-negative");
    assert!(r["accessories"]["residual_norm"].as_f64().unwrap() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "b.json", r#"{ "orders": [0.5, 0.5, 0.5] }"#);
    let out = run(&["solve"], &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("must exceed 2"));

    let garbled = write(&dir, "g.json", "{\n  \"orders\": [0.8, 0.8,\n    true]\n}");
    let out = run(&["solve"], &garbled);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3") && msg.contains("orders"), "{msg}");

    let out = run(&["solve"], &dir.path().join("missing.json"));
    assert_eq!(out.status.code(), Some(3));

    let quad = write(&dir, "q.json", QUAD);
    let out = run(&["action", "--epsilon-ladder", "1e-2,2e-2"], &quad);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["solve", "--fd-step", "-1"], &quad);
    assert_eq!(out.status.code(), Some(2));

    let triple = write(&dir, "t.json", TRIPLE);
    assert_eq!(run(&["metric"], &triple).status.code(), Some(2));

    let out = bin().env("CONICAL_THREADS", "many").arg("solve").arg(&triple).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_and_are_echoed() {
    let dir = TempDir::new().unwrap();
    let quad = write(&dir, "q.json", QUAD);
    let report = dir.path().join("out.json");
    let out = bin()
        .args(["action", "--fd-step", "2e-3", "--budget", "refined", "--epsilon-ladder", "1e-2,5e-3,2.5e-3"])
        .arg(&quad)
        .arg("--output")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["config"]["fd_step"].as_f64(), Some(2e-3));
    assert_eq!(r["config"]["budget"]["gauss"].as_u64(), Some(16));
    assert_eq!(r["action"]["ladder"]["samples"].as_array().unwrap().len(), 3);
    let s = r["action"]["value"].as_f64().unwrap();
    assert!(r["action"]["error_estimate"].as_f64().unwrap() < 1e-6 * s);
}

#[test]
fn deterministic_reports_are_identical() {
    let dir = TempDir::new().unwrap();
    let quad = write(&dir, "q.json", QUAD);
    let a = run(&["action", "--deterministic"], &quad);
    let b = run(&["action", "--deterministic"], &quad);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["timings"], serde_json::json!([]));
}

#[test]
fn verify_skips_three_points() {
    let dir = TempDir::new().unwrap();
    let r = json(&run(&["verify"], &write(&dir, "t.json", TRIPLE)));
    let v = &r["verification"];
    assert!(v["skipped"].as_str().unwrap().contains("no derivatives"));
    assert!(v.get("theorem1").is_none());
}

#[test]
fn verify_gradient_and_metric_pass() {
    let dir = TempDir::new().unwrap();
    let quad = write(&dir, "q.json", QUAD);
    let r = json(&run(&["verify", "--which", "theorem1"], &quad));
    let t1 = &r["verification"]["theorem1"];
    assert_eq!(t1["passed"], Value::Bool(true));
    assert!(t1["residual"].as_f64().unwrap() < 1e-3);
    let r = json(&run(&["verify", "--which", "theorem2"], &quad));
    let t2 = &r["verification"]["theorem2"];
    assert_eq!(t2["passed"], Value::Bool(true));
    assert!(t2["residual"].as_f64().unwrap() < 1e-2);
}

#[test]
fn verify_reports_failure_against_tight_tolerance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "q.json",
        r#"{ "points": [[0.3, 0.0]], "orders": [0.7, 0.7, 0.7, 0.7], "checks": { "theorem2": 1e-9 } }"#,
    );
    let out = run(&["verify", "--which", "theorem2"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["verification"]["theorem2"]["passed"], Value::Bool(false));
}

#[test]
fn sweep_along_the_real_segment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "w.json",
        r#"{ "points": [[0.3, 0.0]], "orders": [0.7, 0.7, 0.7, 0.7],
             "sweep": { "start": [0.1, 0.0], "end": [0.9, 0.0], "steps": 4 } }"#,
    );
    let table = dir.path().join("sweep.csv");
    let out = bin().arg("sweep").arg(&cfg).arg("--table").arg(&table).output().unwrap();
    let r = json(&out);
    assert_eq!(r["sweep"].as_array().unwrap().len(), 5);
    let mut reader = csv::Reader::from_path(&table).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "z1_re");
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let col = |name: &str| -> Vec<f64> {
        let k = headers.iter().position(|h| h == name).unwrap();
        rows.iter().map(|r| r[k].parse().unwrap()).collect()
    };
    let (c_re, c_im, s) = (col("c1_re"), col("c1_im"), col("action"));
    assert!(c_im.iter().all(|v| v.abs() < 1e-8));
    assert!(c_re[0] < 0.0 && c_re[1] < 0.0 && c_re[2].abs() < 1e-8 && c_re[3] > 0.0 && c_re[4] > 0.0);
    for k in 0..2 {
        assert!((s[k] - s[4 - k]).abs() < 1e-8 * s[k].abs());
    }
    assert!(col("g11").iter().all(|&g| g > 0.0));
}

#[test]
fn sweep_records_failed_points() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "w.json",
        r#"{ "points": [[0.3, 0.0]], "orders": [0.7, 0.7, 0.7, 0.7],
             "sweep": { "start": [0.5, 0.0], "end": [1.0, 0.0], "steps": 2 } }"#,
    );
    let out = run(&["sweep"], &cfg);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][9].is_empty());
    assert!(!rows[2][9].is_empty(), "collision with 1 should be recorded");
}
