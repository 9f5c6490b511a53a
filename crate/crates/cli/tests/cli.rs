use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn needle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_needle"))
        .current_dir(dir)
        .env_remove("NEEDLE_THREADS")
        .args(args)
        .output()
        .expect("spawn needle")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report json on stdout")
}

fn fixture() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("interval.json"), r#"{"metric":{"type":"interval","K":0,"N":2,"D":1.0,"n":60}}"#).unwrap();
    fs::write(
        p.join("path.json"),
        r#"{"points":["a","b","c","d"],"metric":{"type":"graph","edges":[[0,1,1.0],[1,2,1.0],[2,3,1.0]]}}"#,
    )
    .unwrap();
    fs::write(p.join("f.json"), r#"{"f":{"a":1,"b":0.5,"c":-0.5,"d":-1}}"#).unwrap();
    fs::write(p.join("flat.csv"), "t,h\n0,1\n0.25,1\n0.5,1\n0.75,1\n1,1\n").unwrap();
    dir
}

#[test]
fn levy_gromov_on_interval_writes_report_and_profile() {
    let dir = fixture();
    let out = needle(dir.path(), &["levy-gromov", "--space", "interval.json", "--K", "0", "--N", "2", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["command"], "levy-gromov");
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["result"]["D_used"], 1.0);
    let csv = fs::read_to_string(dir.path().join("r.profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn flat_density_fails_positive_curvature() {
    let dir = fixture();
    let out = needle(dir.path(), &["check-cd", "--space", "flat.csv", "--K", "1", "--N", "2", "--stride", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["verdict"], "fail");
    assert_eq!(r["result"]["worst_triple"].as_array().unwrap().len(), 3);

    let out = needle(dir.path(), &["check-cd", "--space", "flat.csv", "--K", "-1", "--N", "2", "--stride", "1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn decompose_path_graph() {
    let dir = fixture();
    let out = needle(dir.path(), &["decompose", "--space", "path.json", "--marginals", "f.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["result"]["rays"].as_array().unwrap().len(), 1);
    assert_eq!(r["result"]["rays"][0]["points"], serde_json::json!(["a", "b", "c", "d"]));
    assert!(r["result"]["balance"]["max_abs"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn solve_monge_matches_solver_cost() {
    let dir = fixture();
    let out = needle(dir.path(), &["solve-monge", "--space", "path.json", "--marginals", "f.json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let primal = r["result"]["solution"]["primal_value"].as_f64().unwrap();
    let cost = r["result"]["cost"].as_f64().unwrap();
    assert!((primal - cost).abs() < 1e-9);
}

#[test]
fn configuration_errors_exit_one() {
    let dir = fixture();
    fs::write(dir.path().join("bad.json"), r#"{"metric":{"type":"bogus"}}"#).unwrap();
    let out = needle(dir.path(), &["profile", "--space", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[input.invalid]"));

    let out = needle(dir.path(), &["check-cd", "--space", "flat.csv", "--N", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--K is required"));

    let out = needle(dir.path(), &["decompose", "--space", "missing.json", "--marginals", "f.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]"));
}

#[test]
fn reports_are_deterministic() {
    let dir = fixture();
    let args = ["levy-gromov", "--space", "interval.json", "--K", "0", "--N", "2", "--seed", "7"];
    let strip = |o: &Output| {
        let mut v = report(o);
        v["manifest"].as_object_mut().unwrap().remove("wall_time_seconds");
        serde_json::to_string(&v).unwrap()
    };
    let a = needle(dir.path(), &args);
    let b = needle(dir.path(), &args);
    assert_eq!(strip(&a), strip(&b));
    let c = Command::new(env!("CARGO_BIN_EXE_needle"))
        .current_dir(dir.path())
        .env("NEEDLE_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(strip(&a), strip(&c));
}

#[test]
fn selftest_subset() {
    let dir = fixture();
    let out = needle(dir.path(), &["selftest", "--criteria", "1,2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("criterion")).count(), 2);
}
