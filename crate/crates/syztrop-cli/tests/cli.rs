use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_syztrop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn critical_cp2_passes() {
    let out = run(&["critical", "--family", "cpn", "--n", "2", "--E", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["counts"]["points_plus"], 3);
    assert_eq!(r["counts"]["points_minus"], 3);
    let p = &r["data"]["points"]["plus"][0];
    assert_eq!(p["base_point"]["base"]["qbar"][0], "0");
}

#[test]
fn verify_is_reproducible_for_a_seed() {
    let args = ["verify", "--n", "2", "--samples", "300", "--locus-samples", "100", "--seed", "11"];
    let a = without_timing(report(&run(&args)));
    let b = without_timing(report(&run(&args)));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a["passed"], true);
    let other = without_timing(report(&run(&["verify", "--n", "2", "--samples", "300", "--locus-samples", "100", "--seed", "12"])));
    assert_ne!(a["inputs_digest"], other["inputs_digest"]);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let args = ["verify", "--n", "3", "--samples", "200", "--locus-samples", "50"];
    let one = Command::new(env!("CARGO_BIN_EXE_syztrop"))
        .args(args)
        .env("SYZTROP_THREADS", "1")
        .output()
        .unwrap();
    let two = Command::new(env!("CARGO_BIN_EXE_syztrop"))
        .args(args)
        .env("SYZTROP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(without_timing(report(&one)), without_timing(report(&two)));
}

#[test]
fn injected_bug_is_reported() {
    let out = run(&["verify", "--n", "2", "--samples", "200", "--locus-samples", "50", "--inject-bug"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert!(r["counts"]["mismatches"].as_u64().unwrap() > 0);
}

#[test]
fn converse_recovers_six_ray_fan() {
    let h = data("six_ray_h.json");
    let out = run(&["converse", "--h", h.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let lambdas: Vec<&str> = r["data"]["toric"]["lambdas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(lambdas.len(), 6);
    assert!(lambdas.contains(&"157/50"));
}

#[test]
fn duplicate_exponent_is_an_input_error() {
    let h = data("duplicate_h.json");
    let out = run(&["converse", "--h", h.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

#[test]
fn tropical_exports_c3_graph() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let out = run(&["tropical", "--n", "3", "--export", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("q1,q2,terms"));
    // the vertex of the Y-shaped graph
    assert!(text.lines().any(|l| l == "0,0,0;1;2"));
}

#[test]
fn single_term_h_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    std::fs::write(&h, r#"{"nvars": 1, "terms": [{"e": [1], "c": "1"}]}"#).unwrap();
    let out = run(&["tropical", "--h", h.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
}

#[test]
fn surface_of_c2_has_one_corner() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("r.json");
    let out = run(&["surface", "--n", "2", "--psi0", "3/2", "--out", report_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let corners = r["data"]["corner_curve"].as_array().unwrap();
    assert_eq!(corners.len(), 1);
    assert_eq!(corners[0]["u1"], "3/2");
}

#[test]
fn singular_fiber_points_classify() {
    let mc = report(&run(&["singular-fiber", "--y", "-1+1*T^1"]));
    assert_eq!(mc["data"]["class"], "MaurerCartan");
    let extra = report(&run(&["singular-fiber", "--y", "2"]));
    assert_eq!(extra["data"]["class"], "Extra");
    let sampled = run(&["singular-fiber", "--samples", "200"]);
    assert_eq!(sampled.status.code(), Some(0));
    assert!(report(&sampled)["counts"]["extra"].as_u64().unwrap() > 0);
}
