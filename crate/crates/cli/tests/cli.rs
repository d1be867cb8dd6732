use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const EVAP: &str = r#"
kind = "evaporation"
seed = 7
output = "out"

[trap]
frequencies = ["25 Hz", "25.75 Hz", "24.25 Hz"]

[gas]
n = 2000
temperature = "400 nK"

[elastic]
rate = 1.0

[reactive]
zeta = 0.01

[evaporation]
eta = 2.0
stop_fraction = 0.6
collision_fraction = 0.05
"#;

const SWEEP: &str = r#"
kind = "sweep"
seed = 40
output = "out"

[trap]
frequencies = ["20 Hz", "20.6 Hz"]

[gas]
n = 1500
temperature = "500 nK"

[elastic]
cross_section = "3.42e-6 cm"

[evaporation]
stop_fraction = 0.6
collision_fraction = 0.05

[sweep]
base = "evaporation"
laws = ["isotropic", "krb_1uK"]
eta = [2.0, 2.5]
"#;

fn evapsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evapsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("EVAPSIM_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) {
    fs::write(dir.join("cfg.toml"), text).unwrap();
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), EVAP);
    let out = evapsim(dir.path(), &["run", "cfg.toml", "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "complete");
    assert_eq!(m["seeds"], serde_json::json!([7]));
    assert_eq!(m["config"]["job"]["gas"]["temperature"], 4e-7);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(files, ["summary.json", "trajectory.csv"]);
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t_s,N,T_nK"));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SWEEP);
    let sums = |workers: &str, out: &str| {
        let o = evapsim(dir.path(), &["run", "cfg.toml", "--workers", workers, "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        manifest(&dir.path().join(out))["files"].clone()
    };
    let one = sums("1", "w1");
    assert_eq!(one.as_array().unwrap().len(), 1 + 1 + 4 * 2);
    assert_eq!(one, sums("4", "w4"));
    assert_eq!(one, sums("1", "again"));

    let rows = fs::read_to_string(dir.path().join("w1/sweep.csv")).unwrap();
    let seeds: Vec<&str> = rows.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["40", "41", "42", "43"]);
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), EVAP);
    for (seed, out) in [("7", "a"), ("8", "b")] {
        let o = evapsim(dir.path(), &["run", "cfg.toml", "--seed", seed, "--out", out]);
        assert!(o.status.success());
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("trajectory.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
    assert_eq!(manifest(&dir.path().join("b"))["seeds"], serde_json::json!([8]));
}

#[test]
fn config_errors_exit_2_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), &EVAP.replace("[gas]\n", "[gas]\ncolour = \"blue\"\n"));
    let out = evapsim(dir.path(), &["validate", "cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 10") && err.contains("colour"), "{err}");

    write_config(dir.path(), &EVAP.replace("\"400 nK\"", "\"400 nm\""));
    let out = evapsim(dir.path(), &["run", "cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists(), "nothing runs on a bad config");

    let out = evapsim(dir.path(), &["run", "missing.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), EVAP);
    fs::write(dir.path().join("blocker"), "not a directory").unwrap();
    let out = evapsim(dir.path(), &["run", "cfg.toml", "--out", "blocker/run"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validate_prints_si_values() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SWEEP);
    let out = evapsim(dir.path(), &["validate", "cfg.toml"]);
    assert!(out.status.success());
    let spec: Value = serde_json::from_slice(&out.stdout).unwrap();
    let children = spec["job"]["children"].as_array().unwrap();
    assert_eq!(children.len(), 4);
    assert_eq!(children[0]["job"]["elastic"]["size"], 3.42e-8);
}

#[test]
fn presets_list_and_print() {
    let dir = tempfile::tempdir().unwrap();
    let out = evapsim(dir.path(), &["preset", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["kappa-vs-alpha", "eta-scan", "tb-eta-scan", "antievap", "multiband"] {
        assert!(text.contains(name), "{text}");
    }
    let out = evapsim(dir.path(), &["preset", "multiband", "--print"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("n_max = 3"));
    assert_eq!(evapsim(dir.path(), &["preset", "nope"]).status.code(), Some(2));
}
