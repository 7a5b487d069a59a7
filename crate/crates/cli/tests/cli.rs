use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topobohm"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn spectrum_of_free_ring() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "--beta", "0", "--n-points", "64"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let levels: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (got, want) in levels.iter().zip([0.0, 0.5, 0.5, 2.0, 2.0, 4.5, 4.5, 8.0]) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
    let m = manifest(dir.path());
    assert_eq!(m["status"], "success");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn ab_compare_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "ab-compare",
            "--flux",
            "3.14159265",
            "--charge",
            "1",
            "--n-points",
            "64",
            "--t-final",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ab_compare.json")).unwrap()).unwrap();
    assert!(r["max_trajectory_deviation"].as_f64().unwrap() <= 1e-6);
    assert!(r["max_spectrum_deviation"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn schema_violation_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"schema": "topobohm.scenario/v1", "numerics": {"n_points": 64, "timestep": 0.1}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["evolve", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerics"));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["failure"]["class"], "schema");
}

#[test]
fn missing_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["grw", "--n-points", "32", "--t-final", "0.1", "--dt", "0.01"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn non_commuting_factor_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("aharonov_casher_sigma_x.json");
    let o = run(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not commute with every V(q)"));
    assert_eq!(manifest(dir.path())["failure"]["class"], "physics");
}

#[test]
fn unmet_tolerance_exits_4_naming_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    std::fs::write(
        &cfg,
        r#"{"schema": "topobohm.scenario/v1",
            "factor": {"kind": "character", "beta": 0.3},
            "numerics": {"n_points": 64, "tolerances": {"free_spectrum": 0.0}}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 4);
    let m = manifest(&out);
    assert_eq!(m["failure"]["class"], "numerics");
    assert!(m["failure"]["message"]
        .as_str()
        .unwrap()
        .contains("free_spectrum_relative_error"));
}

#[test]
fn classify_aharonov_casher_without_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ac.json");
    std::fs::write(
        &cfg,
        r#"{"schema": "topobohm.scenario/v1",
            "factor": {"kind": "aharonov_casher", "mu_lambda": 0.125}}"#,
    )
    .unwrap();
    let o = run(&["classify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("classification.json")).unwrap()).unwrap();
    assert_eq!(c["label"], "C2");
    assert!(c["verdict"].as_str().unwrap().contains("not given by a character"));
}

#[test]
fn twisted_check_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("twisted_fermions.json");
    let o = run(&["twisted-check", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("twisted_check.json")).unwrap()).unwrap();
    assert!(r["residual"].as_f64().unwrap() <= 1e-12);
    assert!(r["corrupted_residual"].as_f64().unwrap() > 1e-6);
}

#[test]
fn identical_runs_have_identical_manifests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "grw",
        "--seed",
        "5",
        "--n-points",
        "32",
        "--t-final",
        "2",
        "--dt",
        "0.01",
    ];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    let strip = |mut v: Value| {
        v["wall_time_s"] = Value::Null;
        v
    };
    assert_eq!(strip(manifest(a.path())), strip(manifest(b.path())));
    assert_eq!(
        std::fs::read(a.path().join("events.csv")).unwrap(),
        std::fs::read(b.path().join("events.csv")).unwrap()
    );
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["spectrum", "--beta", "1", "--n-points", "32"])
        .env("TOPOBOHM_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn fermion_pair_keeps_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("fermion_pair.json");
    let o = run(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
