use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::run_args;

fn args(parts: &[&dyn AsRef<std::ffi::OsStr>]) -> Vec<OsString> {
    std::iter::once(OsString::from("uaplab")).chain(parts.iter().map(|p| p.as_ref().to_os_string())).collect()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(dir: &Path, command: &str, config: &str) -> (i32, Value) {
    let cfg = write_config(dir, "cfg.json", config);
    let out_dir = dir.join("out");
    let r = run_args(args(&[&command, &"--config", &cfg, &"--out", &out_dir]));
    let doc = if r.code == 0 {
        serde_json::from_str(&std::fs::read_to_string(&r.stdout).unwrap()).unwrap()
    } else {
        assert!(r.stderr.starts_with("uaplab "), "{}", r.stderr);
        serde_json::from_str(&r.stdout).unwrap()
    };
    (i32::from(r.code), doc)
}

#[test]
fn relu_is_not_transitive() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run(dir.path(), "check-activation", r#"{"command": "check-activation", "params": {"name": "relu"}}"#);
    assert_eq!(code, 0);
    assert_eq!(doc["outputs"]["verdict"]["kind"], "not_transitive");
    assert_eq!(doc["outputs"]["verdict"]["witness"]["fixed_point"]["x"], 1.0);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn escape_reports_corner_count() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run(dir.path(), "escape", r#"{"params": {"name": "leaky_shifted_paper", "b": 1, "K_radius": 2}}"#);
    assert_eq!(code, 0);
    assert_eq!(doc["outputs"]["N"], 3);
    let csv = std::fs::read_to_string(dir.path().join("out/escape.orbit.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,lo,hi"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run(dir.path(), "escape", "{\"params\": {\"b\": 1,,}}");
    assert_eq!(code, 2);
    assert_eq!(doc["kind"], "parse");
    assert_eq!(doc["location"]["line"], 1);
}

#[test]
fn every_bad_field_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"seed": -1, "bogus": 1, "params": {"g": "nope", "eps": 2, "delta": "x", "extra": true}}"#;
    let (code, doc) = run(dir.path(), "transitivity-demo", cfg);
    assert_eq!(code, 2);
    let fields: Vec<&str> = doc["errors"].as_array().unwrap().iter().map(|e| e["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"seed") && fields.contains(&"bogus"), "{fields:?}");

    let (code, doc) = run(dir.path(), "transitivity-demo", r#"{"params": {"g": "nope", "delta": "x", "extra": true}}"#);
    assert_eq!(code, 2);
    let fields: Vec<&str> = doc["errors"].as_array().unwrap().iter().map(|e| e["field"].as_str().unwrap()).collect();
    for f in ["params.g", "params.f", "params.eps", "params.delta", "params.extra"] {
        assert!(fields.contains(&f), "{f} missing from {fields:?}");
    }
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run(dir.path(), "escape", r#"{"command": "rate-sweep", "params": {}}"#);
    assert_eq!(code, 2);
    assert_eq!(doc["errors"][0]["field"], "command");
}

#[test]
fn computation_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (code, doc) = run(dir.path(), "escape", r#"{"params": {"name": "leaky_rescaled_paper", "b": 1, "K_radius": 2}}"#);
    assert_eq!(code, 1);
    assert_eq!(doc["kind"], "computation");
    assert!(doc["message"].as_str().unwrap().contains("not transitive"));
}

#[test]
fn seed_flag_overrides_config_and_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"seed": 1, "params": {"sample_count": 4}}"#);
    let mut hashes = Vec::new();
    for seed in [None, Some("7")] {
        let mut a = args(&[&"limitation-demo", &"--config", &cfg, &"--out", &dir.path()]);
        if let Some(s) = seed {
            a.extend(["--seed".into(), s.into()]);
        }
        let r = run_args(a);
        assert_eq!(r.code, 0);
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&r.stdout).unwrap()).unwrap();
        assert_eq!(doc["seed"], seed.map_or(1, |s| s.parse::<u64>().unwrap()));
        hashes.push(doc["config_hash"].as_str().unwrap().to_string());
    }
    assert_ne!(hashes[0], hashes[1]);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(v["params"].is_object(), "{}", path.display());
    }
}
