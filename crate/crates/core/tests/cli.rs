use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conefred")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_exit_codes() {
    let sq = fixture("square");
    let out = run(&["analyze", &sq, "--c", "1", "--a", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["tool"], "conefred");
    assert_eq!(v["config"]["subcommand"], "analyze");
    assert_eq!(v["result"][0]["overall"], "fredholm");

    assert_eq!(run(&["analyze", &fixture("slit-square"), "--a", "0"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", &sq, "--a", "-0.665"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", &sq, "--c", "one"]).status.code(), Some(3));
    assert_eq!(run(&["analyze", "/nonexistent/domain.json"]).status.code(), Some(4));
    assert_eq!(run(&["analyze", &sq, "--calibration", "/nonexistent/cal.json"]).status.code(), Some(6));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_domain_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"vertices": [], "edges": [], "colour": 3}"#).unwrap();
    assert_eq!(run(&["analyze", p.to_str().unwrap()]).status.code(), Some(5));
}

#[test]
fn csv_rows_per_stratum() {
    let out = run(&["analyze", &fixture("l-shape"), "--c", "1,-1", "--a", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("c,a,gamma,overall,stratum,status,margin"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn window_contains_the_reference_interval() {
    let out = run(&["window", &fixture("square"), "--c", "1,-1"]);
    assert_eq!(out.status.code(), Some(0));
    for r in json(&out)["result"].as_array().unwrap() {
        let g = r["global"].as_array().unwrap();
        assert!(g[0].as_f64().unwrap() <= -2.0 / 3.0 + 1e-3);
        assert!(g[1].as_f64().unwrap() >= 0.5 - 1e-3);
    }
}

#[test]
fn solve_reproduces_harmonic_data() {
    let out = run(&["solve", &fixture("square"), "--g", "x^2 - y^2", "--mesh-n", "32", "--mesh-q", "0.5", "--mesh-nc", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["harmonic"], true);
    assert!(v["result"]["max_relative_error"].as_f64().unwrap() <= 1e-3);

    assert_eq!(run(&["solve", &fixture("square"), "--g", "x^"]).status.code(), Some(3));
    assert_eq!(run(&["solve", &fixture("slit-square"), "--g", "x"]).status.code(), Some(7));
}

#[test]
fn study_trends() {
    let out = run(&["study", &fixture("circle"), "--c=-1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"][0];
    assert_eq!(r["raw_trend"], "decaying");
    assert_eq!(r["budget"]["nullity"], 1);
    assert_eq!(r["trend"], "bounded_below");

    let out = run(&["study", &fixture("square"), "--c=1", "--a", "0"]);
    assert_eq!(json(&out)["result"][0]["trend"], "bounded_below");
}

#[test]
fn output_is_deterministic() {
    let args = ["window", &fixture("hexagon"), "--c", "1,-1", "--jobs", "2"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn calibration_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.json");
    let cal = cal.to_str().unwrap();
    let out = run(&["calibrate", "--sides", "4", "--a-step", "0.1", "--out", cal]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(cal).unwrap()).unwrap();
    let slope = written["calibration"]["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.2, "slope {slope}");

    let out = run(&["analyze", &fixture("square"), "--a", "0", "--calibration", cal]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["config"]["calibration"]["slope"].as_f64().unwrap(), slope);
}
