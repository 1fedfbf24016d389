use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commonness")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn exceptional_system_is_unknown() {
    let out = run(&["classify", "1 1 -1 -1 0; 1 -1 3 0 -3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["status"], "unknown");
}

#[test]
fn single_equation_certificate() {
    let out = run(&["certify", "1 2 3 4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["sigma"]["total_exact"], "-2");
}

#[test]
fn witness_at_prime() {
    let out = run(&["--p", "101", "--epsilon", "0.05", "certify", "1 2 3 4"]);
    assert_eq!(out.status.code(), Some(0));
    let gap = json(&out)["witness"]["gap"].as_f64().unwrap();
    assert!((gap - 2.0 * 0.05f64.powi(4) * -2.0).abs() < 1e-9, "{gap}");
}

#[test]
fn certificate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let p = path.to_str().unwrap();
    assert_eq!(run(&["--out", p, "certify", "1 2 3 4"]).status.code(), Some(0));
    let out = run(&["certify", "1 2 3 4", "--verify", p]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verified"], true);
    // a certificate for a different system must not verify
    let out = run(&["certify", "1 2 3 5", "--verify", p]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn sigma_from_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let p = path.to_str().unwrap();
    run(&["--out", p, "certify", "1 2 3 4"]);
    let out = run(&["sigma", "1 2 3 4", "--template", p]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["certifies"], true);
}

#[test]
fn search_a1_is_empty() {
    let out = run(&["search", "--case", "a1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["enumerated"], 4096);
    assert_eq!(v["solutions"].as_array().unwrap().len(), 0);
    assert!(v.get("runtime_secs").is_none());
}

#[test]
fn malformed_input_exits_one() {
    assert_eq!(run(&["classify", "1 2; 3"]).status.code(), Some(1));
    assert_eq!(run(&["classify", "1 2 3; 2 4 6"]).status.code(), Some(1));
    assert_eq!(run(&["classify", "1 x 3"]).status.code(), Some(1));
    assert_eq!(run(&["classify", "--file", "/nonexistent/matrix.txt"]).status.code(), Some(1));
}

#[test]
fn output_is_deterministic() {
    let args = ["--seed", "7", "--M", "5", "--trials", "100", "mc", "1 0 -3 -4; 0 1 1 2"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["classify", "1 -1 1 -1 0; -2 4 3 0 -9"]);
    let d = run(&["classify", "1 -1 1 -1 0; -2 4 3 0 -9"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn counts_csv() {
    let out = run(&["--format", "text", "counts", "1 0 -3 -4; 0 1 1 2", "--N", "10,20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,6,"));
}

#[test]
fn verify_common_passes_on_common_system() {
    let out = run(&["--p", "5", "--trials", "50", "verify-common", "1 2 0 0 3; 0 0 1 2 3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["passed"], true);
}
