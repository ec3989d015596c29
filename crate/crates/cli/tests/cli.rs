use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smallcap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("smallcap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn caps_lists_family() {
    let v = json_of(&run(&["caps", "--curve", "cone", "--beta", "0.5", "--R", "256"]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["count"], 16);
    assert_eq!(v["caps"].as_array().unwrap().len(), 16);
    let v = json_of(&run(&["caps", "--curve", "parabola", "--alpha", "1", "--R", "64"]));
    assert_eq!(v["count"], 128);
}

#[test]
fn oracle_reports_ratio() {
    let v = json_of(&run(&["oracle", "--example", "concentrated", "--alpha", "0.75", "--p", "8", "--R", "256"]));
    let ratio = v["ratio"].as_f64().unwrap();
    let lhs = v["lhs"].as_f64().unwrap();
    let rhs = v["rhs"].as_f64().unwrap();
    assert!((ratio - lhs / rhs).abs() < 1e-12 * ratio);
    assert_eq!(v["example_slope"], 0.1875);
}

#[test]
fn slice_json_shape() {
    let v = json_of(&run(&[
        "slice", "--R", "1024", "--beta", "0.75", "--r", "32", "--p", "4", "--samples", "3",
    ]));
    for key in ["params", "analytic", "brute", "ratio", "regime_reports"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["ratio"].as_f64().unwrap() > 0.0);
    let v = json_of(&run(&[
        "slice", "--R", "1024", "--beta", "0.75", "--r", "32", "--p", "4", "--method", "analytic",
    ]));
    assert!(v["brute"].is_null());
}

#[test]
fn sweep_exit_codes() {
    let pass = run(&["sweep", "--alpha", "0.75", "--p", "8", "--R", "128,256,512,1024"]);
    assert_eq!(pass.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&pass.stdout).unwrap();
    assert_eq!(v["verdict"], "pass");
    assert_eq!(v["excluded_smallest"], true);

    let fail = run(&["sweep", "--alpha", "0.75", "--p", "8", "--R", "128,256,512", "--tolerance", "1e-6"]);
    assert_eq!(fail.status.code(), Some(2));

    let err = run(&["sweep", "--R", "128,256"]);
    assert_eq!(err.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&err.stderr).contains("at least 3"));
}

#[test]
fn config_file_and_report() {
    let cfg = scratch("flat.cfg");
    std::fs::write(&cfg, "# flat example\nexample = flat\nalpha = 1\np = 3\nR_min = 128\nR_max = 1024\n").unwrap();
    let res = scratch("flat.json");
    let out = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--output", res.to_str().unwrap(), "--jobs", "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = run(&["report", "--input", res.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    let json = run(&["report", "--input", res.to_str().unwrap(), "--format", "json"]);
    assert_eq!(String::from_utf8(json.stdout).unwrap(), std::fs::read_to_string(&res).unwrap());

    let bad = scratch("bad.cfg");
    std::fs::write(&bad, "p = 3\nnot a pair\n").unwrap();
    let out = run(&["sweep", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn example_then_project() {
    let raw = scratch("conc.bin");
    let v = json_of(&run(&["example", "--example", "concentrated", "--R", "32", "--output", raw.to_str().unwrap()]));
    assert_eq!(v["schema_version"], 1);
    assert!(raw.exists());
    let v = json_of(&run(&["project", "--input", raw.to_str().unwrap(), "--R", "32", "--alpha", "0.5", "--p", "4"]));
    assert_eq!(v["count"], v["cap_l2"].as_array().unwrap().len());
    // samples are stored in single precision
    assert!(v["reconstruction_error"].as_f64().unwrap() < 1e-5);
    assert!(v["ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn envelope_summary() {
    let v = json_of(&run(&["envelope", "--R", "16", "--lambda", "0.01"]));
    let scales = v["per_scale"].as_array().unwrap();
    assert_eq!(scales.len(), 3);
    let amp = &v["amplitude"];
    assert!(amp["rhs"].as_f64().unwrap() <= amp["gwz_rhs"].as_f64().unwrap());
    let one = json_of(&run(&["envelope", "--R", "16", "--scale-s", "0.5", "--seed", "3"]));
    assert_eq!(one["per_scale"].as_array().unwrap().len(), 1);
}

#[test]
fn unknown_values_are_errors() {
    let out = run(&["caps", "--curve", "circle", "--alpha", "0.5", "--R", "64"]);
    assert_ne!(out.status.code(), Some(0));
    let out = run(&["caps", "--curve", "cone", "--beta", "0.75", "--R", "100"]);
    assert_eq!(out.status.code(), Some(1));
}
