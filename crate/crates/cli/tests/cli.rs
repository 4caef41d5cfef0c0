use std::path::Path;
use std::process::{Command, Output};

use cmj_cli::io::{parse_model, save_model};
use cmj_core::fixtures;
use cmj_core::model::ModelSpec;
use proptest::prelude::*;
use serde_json::Value;

fn cmj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmj")).args(args).output().expect("binary runs")
}

fn write_model(dir: &Path, text: &str) -> String {
    let p = dir.join("model.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn analyze_det2() {
    let out = cmj(&["analyze", "--fixture", "det2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["alpha"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    for key in ["pi", "h", "beta", "nu", "sup_h", "spine_kernel"] {
        assert!(!v[key].is_null(), "{key}");
    }
    assert_eq!(v["xlogx"]["verdict"], "finite");
    assert_eq!(v["xlogx"]["truncated_means"].as_array().unwrap().len(), 4);
}

#[test]
fn analyze_heavy_flags_divergence() {
    let out = cmj(&["analyze", "--fixture", "heavy", "--samples", "1000"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["xlogx"]["verdict"], "divergent_likely");
}

#[test]
fn simulate_row_contract() {
    let out = cmj(&[
        "simulate", "--fixture", "yule1", "--horizon", "8", "--replicates", "10000", "--times", "2,4,8", "--seed", "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replicate,time,W,Z_born,born,pending,extinct,truncated"));
    assert_eq!(lines.count(), 30_000);
}

#[test]
fn simulate_characteristic_columns() {
    let out = cmj(&[
        "simulate", "--fixture", "yule1", "--horizon", "2", "--replicates", "3", "--times", "1,2", "--seed", "1",
        "--chi", "born,alive,type_count:cell", "--root", "cell",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("replicate,time,W,Z_born,Z_alive,Z_type_count_cell,born,pending,extinct,truncated\n"));
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 10);
}

#[test]
fn spine_csv() {
    let out = cmj(&["spine", "--fixture", "det2", "--steps", "4", "--replicates", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "replicate,k,sigma,T,tau,xi_bar,eta_partial,lower_bound");
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[1], "0,0,t1,,0,1,0.5,0");
    let last: Vec<&str> = rows[4].split(',').collect();
    assert_eq!(last[..6], ["0", "3", "t1", "1", "3", "1"]);
    assert!((last[6].parse::<f64>().unwrap() - 0.9375).abs() < 1e-12);
    assert_eq!(last[7], "0");
}

#[test]
fn verify_suite_writes_report_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = cmj(&[
        "verify", "--fixture", "sym2", "--suite", "spine_chain,renewal_mean", "--seed", "42", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["summary"]["passed"], 2);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json.meta.json")).unwrap()).unwrap();
    assert!(meta["created_unix_seconds"].as_u64().unwrap() > 0);
}

#[test]
fn failed_verification_exits_two() {
    let out = cmj(&["dichotomy", "--finite", "heavy", "--divergent", "sym2", "--seed", "1", "--replicates", "30"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["summary"]["failed"].as_u64().unwrap() >= 1);
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"name": "x", "types": ["a"], "channels": [{"parent": "a", "child": "a", "count": {"kind": "binomial", "n": 2}, "age": {"kind": "exponential", "rate": 1.0}}]}"#, "line 1"),
        (r#"{"name": "x", "types": ["a"], "channels": [{"parent": "a", "child": "a", "count": {"kind": "poisson", "mean": 2.0}, "age": {"kind": "exponential", "rate": -1.0}}]}"#, "invalid parameter"),
    ];
    for (text, needle) in cases {
        let path = write_model(dir.path(), text);
        let out = cmj(&["analyze", "--model", &path]);
        assert_eq!(out.status.code(), Some(1));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
    assert_eq!(cmj(&["analyze", "--fixture", "nope"]).status.code(), Some(1));
    assert_eq!(cmj(&["verify", "--fixture", "sym2", "--suite", "bogus", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(cmj(&["simulate", "--fixture", "sym2", "--horizon", "1", "--replicates", "1", "--times", "2", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(cmj(&["spine", "--fixture", "sym2", "--steps", "3"]).status.code(), Some(1));
    assert_eq!(cmj(&["analyze", "--fixture", "det2", "--model", "x.json"]).status.code(), Some(1));
}

#[test]
fn sequential_and_parallel_agree() {
    let args = ["simulate", "--fixture", "asym2", "--horizon", "3", "--replicates", "50", "--times", "1,3", "--seed", "5"];
    let seq = cmj(&[&args[..], &["--threads", "1"]].concat());
    let par = cmj(&args);
    assert_eq!(seq.stdout, par.stdout);
}

fn scale_floats(v: &mut Value, factor: f64) {
    match v {
        Value::Number(n) if n.is_f64() => *v = serde_json::json!(n.as_f64().unwrap() * factor),
        Value::Array(xs) => xs.iter_mut().for_each(|x| scale_floats(x, factor)),
        Value::Object(map) => map.values_mut().for_each(|x| scale_floats(x, factor)),
        _ => {}
    }
}

proptest! {
    #[test]
    fn fixture_round_trip(idx in 0..fixtures::NAMES.len(), factor in 0.01f64..100.0, shared in any::<bool>()) {
        let mut value = serde_json::to_value(fixtures::spec(fixtures::NAMES[idx]).unwrap()).unwrap();
        scale_floats(&mut value, factor);
        value["channels"][0]["shared_age"] = Value::Bool(shared);
        let spec: ModelSpec = serde_json::from_value(value).unwrap();
        prop_assert_eq!(parse_model(&save_model(&spec)).unwrap(), spec);
    }
}
