use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn drconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drconf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report on stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = drconf(&["verify-algebra", "--config", "/nonexistent/algebra.json"]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"M": 6, "truncaton": 4}"#);
    assert_eq!(code(&drconf(&["coeffsys", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&drconf(&["frobnicate"])), 2);
}

#[test]
fn symmetric_j_fails_as_not_skew() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sym.json",
        r#"{"k": 2, "m": 1, "j_maps": [[[0, 1], [1, 0]]]}"#,
    );
    let out = drconf(&["verify-algebra", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(report(&out)["reason"], "NotSkew");
}

#[test]
fn quaternionic_catalog_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "q.json",
        r#"{"catalog": "quaternionic", "multiplicity": 1}"#,
    );
    let out = drconf(&["verify-algebra", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["result"]["m"], 3);
    assert_eq!(r["result"]["j2_condition"]["holds"], true);
    for check in r["result"]["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "{check}");
    }
}

#[test]
fn tables_reproduce_constants_and_zero_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.json", r#"{"catalog": "quaternionic"}"#);
    let out = drconf(&["verify-tables", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let constants = r["result"]["constants"].as_array().unwrap();
    let named = |name: &str| {
        constants
            .iter()
            .find(|c| c["name"] == name)
            .unwrap_or_else(|| panic!("{name} missing"))["expected"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(named("L_V g(V,A)"), 0.5);
    assert_eq!(named("L_V g(J_ZV,Z)"), -1.0);
    assert_eq!(named("L_J_ZV g(V,Z)"), 1.0);
    assert_eq!(named("L_J_ZV g(J_ZV,A)"), 0.5);
    assert_eq!(named("L_Z g(Z,A)"), 1.0);
    assert_eq!(named("L_A g(Z,Z)"), -2.0);

    assert_eq!(code(&drconf(&["verify-tables", "--tol", "0"])), 1);
}

#[test]
fn einstein_constant_is_negative() {
    let out = drconf(&["check-einstein", "--samples", "5"]);
    assert_eq!(code(&out), 0);
    let lambda = report(&out)["result"]["einstein"]["lambda"].as_f64().unwrap();
    assert!((lambda + 1.5).abs() < 1e-6, "{lambda}");
}

#[test]
fn spaceform_full_euclidean_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.json",
        r#"{"model": "euclidean", "a": [1, 2, 3],
            "rot": [[0, 1, 0], [-1, 0, 2], [0, -2, 0]],
            "b1": 0.5, "b2": [0.1, -0.2, 0.3]}"#,
    );
    let out = drconf(&["spaceform", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["result"]["fields"].as_array().unwrap().len(), 1);
}

#[test]
fn spaceform_rejects_non_skew_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.json",
        r#"{"field": {"model": "euclidean", "a": [0, 0], "rot": [[0, 1], [1, 0]], "b1": 0, "b2": [0, 0]}}"#,
    );
    let out = drconf(&["spaceform", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(report(&out)["reason"], "NotSkew");
}

#[test]
fn coeffsys_survivors_and_replay() {
    let out = drconf(&["coeffsys"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let surviving: Vec<&str> = r["result"]["surviving"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(surviving, ["C1^[1]", "C1^[2]", "C5"]);

    // Each exported solution replays through the block equations.
    let dir = tempfile::tempdir().unwrap();
    for (i, sol) in r["result"]["solutions"].as_array().unwrap().iter().enumerate() {
        let body = serde_json::json!({ "expansion": sol }).to_string();
        let cfg = write(dir.path(), &format!("s{i}.json"), &body);
        let out = drconf(&["confsys-residuals", "--config", cfg.to_str().unwrap(), "--tol", "1e-6"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        let rho = report(&out)["result"]["expansion"]["max_abs_rho"].as_f64().unwrap();
        assert!(rho < 1e-6);
    }
}

#[test]
fn left_invariant_frame_field_is_not_killing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.json", r#"{"field": {"kind": "frame", "index": 3}}"#);
    assert_eq!(
        code(&drconf(&["confsys-residuals", "--config", cfg.to_str().unwrap()])),
        1
    );
    let cfg = write(
        dir.path(),
        "g.json",
        r#"{"field": {"kind": "right_invariant", "index": 3}}"#,
    );
    assert_eq!(
        code(&drconf(&["confsys-residuals", "--config", cfg.to_str().unwrap()])),
        0
    );
}

#[test]
fn default_probe_is_rigid() {
    let out = drconf(&["probe"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["result"]["report"]["verdict"], "rigid");
    assert!(r["result"]["report"]["nullspace_dim"].as_u64().unwrap() > 0);
    assert!(r["result"]["max_block_residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn half_plane_probe_is_not_rigid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.json", r#"{"target": {"half_space": 2}}"#);
    let out = drconf(&["probe", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let fit = &report(&out)["result"]["hyperbolic_fit"];
    assert!(fit["max_abs_rho"].as_f64().unwrap() > 0.1);
    assert!(fit["max_residual"].as_f64().unwrap() < 1e-4);

    // Expecting rigidity there is a check failure.
    let cfg = write(
        dir.path(),
        "r.json",
        r#"{"target": {"half_space": 2}, "expect": "rigid"}"#,
    );
    assert_eq!(code(&drconf(&["probe", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn reports_are_deterministic_and_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["spaceform", "--seed", "9", "--samples", "10"];
    let run = |out: &Path, workers: &str| {
        let mut v = args.to_vec();
        v.extend(["--workers", workers, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&drconf(&v)), 0);
        std::fs::read(out).unwrap()
    };
    let first = run(&a, "1");
    let second = run(&b, "3");
    assert_eq!(first, second);

    let r: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(r["tool"], "drconf");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);

    let other = report(&drconf(&["spaceform", "--seed", "10", "--samples", "10"]));
    assert_ne!(other["config_hash"], r["config_hash"]);
}
