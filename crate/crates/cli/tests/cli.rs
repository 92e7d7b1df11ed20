use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn wlfactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlfactor"))
        .args(args)
        .env_remove("WLFACTOR_ORACLE_BOUND")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn factor_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = wlfactor(&["factor", "--p", "13", "--poly", "12,0,0,1", "--json-out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["input"]["p"], 13);
    let outcome = report["outcome"].as_str().unwrap();
    assert!(outcome == "full" || outcome == "stalled");
    if outcome == "full" {
        assert_eq!(report["factors"], serde_json::json!(["4,1", "10,1", "12,1"]));
    }
}

#[test]
fn factor_is_deterministic() {
    let a = wlfactor(&["factor", "--p", "13", "--poly", "12,0,0,1"]);
    let b = wlfactor(&["factor", "--p", "13", "--poly", "12,0,0,1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn non_prime_is_rejected() {
    let out = wlfactor(&["factor", "--p", "4", "--poly", "1,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prime"));
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"max_recursion_depth": 0}"#).unwrap();
    let out = wlfactor(&["factor", "--p", "13", "--poly", "12,0,0,1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(&cfg, r#"{"unknown_knob": true}"#).unwrap();
    let out = wlfactor(&["factor", "--p", "13", "--poly", "12,0,0,1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_error_is_nonzero() {
    let out = wlfactor(&["factor", "--p"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(!out.stderr.is_empty());
}

#[test]
fn scheme_fixture_cyclic3_is_primitive() {
    let out = wlfactor(&["scheme", "--fixture", "cyclic:3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["primitivity"]["primitive"], true);
    assert_eq!(v["scheme"]["n"], 3);
    assert_eq!(v["closed_subsets"].as_array().unwrap().len(), 2);
}

#[test]
fn fixture_round_trips_through_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let out = wlfactor(&["fixture", "dihedral:4", "--json-out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = wlfactor(&["scheme", "--file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["primitivity"]["primitive"], false);
    assert_eq!(wlfactor(&["fixture", "klein:4"]).status.code(), Some(1));
}

#[test]
fn verify_against_wl_dump_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let colors = dir.path().join("c.json");
    let c = colors.to_str().unwrap();
    let out = wlfactor(&["wl", "--p", "13", "--poly", "12,0,0,1", "--json-out", c]);
    assert_eq!(out.status.code(), Some(0));

    let out = wlfactor(&["verify", "--p", "13", "--poly", "12,0,0,1", "--against", c]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let checks = json(&out)["checks"].as_array().unwrap().clone();
    assert!(checks.iter().all(|c| c["passed"] == true));

    // Copy one color over another: still parses, but no longer a partition.
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&colors).unwrap()).unwrap();
    let cols = v["colors"].as_array_mut().unwrap();
    cols[0]["coeffs"] = cols[1]["coeffs"].clone();
    fs::write(&colors, v.to_string()).unwrap();
    let out = wlfactor(&["verify", "--p", "13", "--poly", "12,0,0,1", "--against", c]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    let against = report["checks"].as_array().unwrap().iter().find(|c| c["name"] == "against").unwrap().clone();
    assert_eq!(against["passed"], false);

    fs::write(&colors, "{ not json").unwrap();
    let out = wlfactor(&["verify", "--p", "13", "--poly", "12,0,0,1", "--against", c]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn batch_mode_reports_each_line() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("b.txt");
    fs::write(&batch, "# comment\n13;12,0,0,1\n13;2,10,1\n7;2,1\n").unwrap();
    let out = wlfactor(&["factor", "--batch", batch.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1]["factors"], serde_json::json!(["11,1", "12,1"]));
    assert_eq!(lines[2]["factors"], serde_json::json!(["2,1"]));
}

#[test]
fn oracle_bound_env_override() {
    let out = Command::new(env!("CARGO_BIN_EXE_wlfactor"))
        .args(["verify", "--p", "13", "--poly", "12,0,0,1"])
        .env("WLFACTOR_ORACLE_BOUND", "7")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
}
