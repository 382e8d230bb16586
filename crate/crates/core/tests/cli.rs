//! The `regcalc` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn regcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regcalc")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn temp_file(name: &str, body: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("regcalc-{}-{name}", std::process::id()));
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn dalpha_at_an_oscillating_point() {
    let f = example("oscillating.fn");
    let out = regcalc(&["dalpha", f.to_str().unwrap(), "--f", "g", "--alpha", "id", "--x", "0", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let got = v["points"][0]["result"]["value"].as_f64().unwrap();
    assert!((got - 1.0).abs() < 1e-9, "{v}");
}

#[test]
fn lhospital_report_fields() {
    let f = example("integer-jumps.fn");
    let out = regcalc(&["lhospital", f.to_str().unwrap(), "--f", "f", "--g", "alpha", "--alpha", "alpha", "--endpoint", "+inf", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["rule", "hypotheses", "case", "conclusion", "oracle", "agree"] {
        assert!(v.get(key).is_some(), "missing {key}: {v}");
    }
    assert_eq!(v["agree"], Value::Bool(true));
    let a = v["conclusion"]["limit"].as_f64().unwrap();
    assert!((a - 1.0).abs() < 1e-6);
    assert!(v["hypotheses"].as_array().unwrap().iter().all(|h| h["status"] == "verified-on-grid"));
}

#[test]
fn json_output_is_deterministic() {
    let f = example("growth.fn");
    let args = ["lhospital", f.to_str().unwrap(), "--f", "f", "--g", "g", "--alpha", "id", "--endpoint", "b", "--json"];
    let (a, b) = (regcalc(&args), regcalc(&args));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn failed_hypothesis_exits_one() {
    let f = example("sign-change.fn");
    let out = regcalc(&["lhospital", f.to_str().unwrap(), "--f", "f", "--g", "g", "--alpha", "id", "--endpoint", "+inf"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[FAILED]"), "{text}");
}

#[test]
fn syntax_errors_name_the_line() {
    let p = temp_file("bad.fn", "fn f on (0, 1):\n  piece (0, 1): x +\n");
    let out = regcalc(&["eval", p.to_str().unwrap(), "--f", "f", "--x", "0.5"]);
    std::fs::remove_file(&p).ok();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unknown_names_and_missing_flags_exit_two() {
    let f = example("oscillating.fn");
    let f = f.to_str().unwrap();
    assert_eq!(regcalc(&["eval", f, "--f", "nope", "--x", "0"]).status.code(), Some(2));
    assert_eq!(regcalc(&["dalpha", f, "--f", "g", "--x", "0"]).status.code(), Some(2));
    assert_eq!(regcalc(&["frobnicate", f]).status.code(), Some(2));
    assert_eq!(regcalc(&["eval", "/nonexistent/defs.fn", "--f", "g", "--x", "0"]).status.code(), Some(2));
}

#[test]
fn stolz_on_sequences() {
    let f = example("stolz-odd.seq");
    let out = regcalc(&["stolz", f.to_str().unwrap(), "--f", "f", "--g", "g", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["conclusion"]["limit"], "+inf");
}

#[test]
fn ftc_and_integrate_agree() {
    let f = example("integer-jumps.fn");
    let f = f.to_str().unwrap();
    let ftc = regcalc(&["ftc", f, "--f", "f", "--alpha", "alpha", "--s", "0.5", "--t", "2.5", "--json"]);
    assert_eq!(ftc.status.code(), Some(0), "{}", String::from_utf8_lossy(&ftc.stderr));
    let int = regcalc(&["integrate", f, "--f", "one", "--alpha", "alpha", "--s", "0.5", "--t", "2.5", "--json"]);
    assert_eq!(int.status.code(), Some(0), "{}", String::from_utf8_lossy(&int.stderr));
}

#[test]
fn plot_csv_has_a_header_and_rows() {
    let f = example("integer-jumps.fn");
    let csv = std::env::temp_dir().join(format!("regcalc-{}-plot.csv", std::process::id()));
    let out = regcalc(&["dalpha", f.to_str().unwrap(), "--f", "f", "--alpha", "alpha", "--x", "1", "--s", "0.5", "--t", "3", "--plot-csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&csv).unwrap();
    std::fs::remove_file(&csv).ok();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("x,f_left,f_right,dalpha_f"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
}
