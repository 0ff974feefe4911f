use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ISLAND: &str = r#"{"u":0.873064856,"v":0.965312213,"c":0.5,"rho":2}"#;

fn run(dir: &Path, spec: &str, extra: &[&str]) -> Output {
    let path = dir.join("spec.json");
    fs::write(&path, spec).unwrap();
    Command::new(env!("CARGO_BIN_EXE_lorenz-renorm"))
        .arg("--spec")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("LORENZ_RENORM_THREADS")
        .output()
        .unwrap()
}

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn eval_writes_csv_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"command":"eval","map":{"u":0.9,"v":0.8,"c":0.4,"rho":2},"x":[0,0.2,0.4,1]}"#;
    let out = run(dir.path(), spec, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/eval.csv")).unwrap();
    let mut lines = text.lines();
    let config: Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(config["map"]["phi"], "id");
    assert_eq!(config["seed"], 0);
    assert_eq!(lines.next(), Some("x,fx"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[2][1], "");
    assert_eq!(rows[3][1].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn detect_success_and_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), &format!(r#"{{"command":"detect","type":[1,2],"map":{ISLAND}}}"#), &[]);
    assert_eq!(ok.status.code(), Some(0));
    let d = read_json(dir.path(), "detect.json");
    assert_eq!(d["data"]["type"], serde_json::json!([1, 2]));
    assert!(d["data"]["p"].as_f64().unwrap() < 0.5);

    let bad = run(dir.path(), &format!(r#"{{"command":"detect","type":[3,3],"map":{ISLAND}}}"#), &[]);
    assert_eq!(bad.status.code(), Some(2));
    let e = read_json(dir.path(), "error.json");
    assert_eq!(e["kind"], "not-renormalizable");
    assert!(e["config"]["type"].is_array());
    assert!(!e["diagnostics"].is_null());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [
        r#"{"command":"detect","typo":[1,2]}"#,
        r#"{"command":"launch"}"#,
        "not json",
        r#"{"command":"eval","map":{"u":1.5,"v":0.8,"c":0.4,"rho":2},"x":[0.1]}"#,
    ] {
        let out = run(dir.path(), spec, &[]);
        assert_eq!(out.status.code(), Some(1), "{spec}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_lorenz-renorm"))
        .args(["--spec", "/nonexistent/spec.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn flags_override_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = format!(r#"{{"command":"kneading","depth":16,"map":{ISLAND},"seed":5,"threads":1}}"#);
    assert!(run(dir.path(), &spec, &["--seed", "9"]).status.success());
    let k = read_json(dir.path(), "kneading.json");
    assert_eq!(k["config"]["seed"], 9);
    assert_eq!(k["config"]["depth"], 16);
    assert_eq!(k["kneading"]["k_minus"].as_str().unwrap().len(), 16);
}

#[test]
fn scan_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"command":"scan","rho":2,"slice":{"c0":0.5,"grid":[8,6]}}"#;
    let out = run(dir.path(), spec, &["--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/scan.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 48);
    assert_eq!(read_json(dir.path(), "scan.json")["cells"], 48);
}

#[test]
fn renormalize_and_bounds_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = format!(r#"{{"command":"renormalize","type":[[1,2],[1,2]],"map":{ISLAND}}}"#);
    assert!(run(dir.path(), &spec, &[]).status.success());
    let r = read_json(dir.path(), "renormalize.json");
    let steps = r["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 2);
    assert!(steps.iter().all(|s| s["residual"].as_f64().unwrap() <= 1e-9));

    let spec = format!(r#"{{"command":"bounds","type":[1,2],"map":{ISLAND}}}"#);
    let out = run(dir.path(), &spec, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/bounds.csv")).unwrap();
    // config line, header, one row per K
    assert_eq!(csv.lines().count(), 2 + 3);
}
