use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtransport"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_ok(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(v["schema"], 1);
    v
}

fn write_uniform(path: &Path) {
    let mut s = String::from("x,density\n");
    for i in 0..=3000 {
        let x = -1.0 + i as f64 * 1e-3;
        let v = if i == 1000 || i == 2000 {
            0.5
        } else if i > 1000 && i < 2000 {
            1.0
        } else {
            0.0
        };
        s.push_str(&format!("{x},{v}\n"));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn phi_curve_writes_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(
        dir.path(),
        &["phi-curve", "--alpha-max", "10", "--points", "20", "--svg"],
    );
    assert_eq!(v["points"], 20);
    assert_eq!(v["monotone_within_2delta"], true);
    let csv = fs::read_to_string(dir.path().join("phi_curve.csv")).unwrap();
    assert!(csv.starts_with("alpha,phi,delta,N_used,linear_bound,conjecture\n"));
    assert_eq!(csv.lines().count(), 21);
    assert!(fs::read_to_string(dir.path().join("phi_curve.svg"))
        .unwrap()
        .contains("<polyline"));
    let again = tempfile::tempdir().unwrap();
    json_ok(again.path(), &["phi-curve", "--alpha-max", "10", "--points", "20"]);
    for name in ["phi_curve.csv", "phi_curve.json"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(again.path().join(name)).unwrap()
        );
    }
}

#[test]
fn empty_alpha_range_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["phi-curve", "--alpha-max", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["rocket", "--nonsense"]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["--precision", "quad", "restricted"]).status.code(),
        Some(2)
    );
}

#[test]
fn cbm_without_weights_gives_quadrant_bound() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(dir.path(), &["cbm", "--N", "50", "--weights", "", "--eta-step", "0.05"]);
    let upper = v["upper"].as_f64().unwrap();
    let lower = v["lower"].as_f64().unwrap();
    assert!((upper - 0.155940).abs() < 2e-3, "upper {upper}");
    assert!(lower > 0.0 && lower < upper, "lower {lower}");
    assert_eq!(v["conjecture"], 0.0384517);
    let csv = fs::read_to_string(dir.path().join("cbm_scan.csv")).unwrap();
    assert!(csv.starts_with("eta,lambda_min,lambda_max,quadrature_error\n"));
}

#[test]
fn restricted_seed_values() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(dir.path(), &["restricted", "--N", "0"]);
    assert!((v["seed_eigenvalue"].as_f64().unwrap() + 0.5).abs() < 1e-12);
    let v = json_ok(dir.path(), &["restricted", "--N", "170"]);
    assert!((v["seed_eigenvalue"].as_f64().unwrap() - 0.1113).abs() < 5e-4);
}

#[test]
fn restricted_ascent_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(
        dir.path(),
        &[
            "restricted",
            "--N",
            "6",
            "--iters",
            "3",
            "--ode-dx",
            "0.01",
            "--report-dx",
            "0.01",
        ],
    );
    let seed = v["seed_objective"]["value"].as_f64().unwrap();
    let best = v["ascent"]["best_objective"]["value"].as_f64().unwrap();
    assert!(best >= seed - 1e-9);
    let trace = fs::read_to_string(dir.path().join("restricted_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective,"));
}

#[test]
fn classical_uniform_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.csv");
    write_uniform(&mu);
    for (a, expected) in [("1", 1.0), ("1.5", 0.5)] {
        let v = json_ok(
            dir.path(),
            &[
                "classical",
                "--mu",
                mu.to_str().unwrap(),
                "--nu",
                mu.to_str().unwrap(),
                "--target",
                a,
                "--oracle",
                "4000",
            ],
        );
        assert!((v["p_star"].as_f64().unwrap() - expected).abs() < 5e-3);
        assert!(v["oracle"]["difference"].as_f64().unwrap().abs() < 5e-3);
    }
}

#[test]
fn classical_rejects_unnormalized_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,density\n0,1\n1,1\n2,1\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "classical",
            "--mu",
            bad.to_str().unwrap(),
            "--nu",
            bad.to_str().unwrap(),
            "--target",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rocket_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    fs::write(
        &path,
        r#"{"M": 2, "l": 1.5, "lambda": 0.3, "burns": [], "t_final": 0.5}"#,
    )
    .unwrap();
    let v = json_ok(dir.path(), &["rocket", "--schedule", path.to_str().unwrap()]);
    assert_eq!(v["reduction"]["alpha_eff"], 9.0);
    assert_eq!(v["reduction"]["beta"], 0.25);

    fs::write(&path, r#"{"M": 2, "l": 1.5, "lambda": 0.3, "burns": [], "t_final": 0}"#).unwrap();
    let v = json_ok(dir.path(), &["rocket", "--schedule", path.to_str().unwrap()]);
    assert_eq!(v["reduction"]["bound"], 0.0);

    fs::write(
        &path,
        r#"{"M": 2, "l": 1, "lambda": 0.1, "burns": [{"t": 0, "m": 1}], "t_final": 1}"#,
    )
    .unwrap();
    let v = json_ok(dir.path(), &["rocket", "--schedule", path.to_str().unwrap()]);
    assert_eq!(v["reduction"]["c"], serde_json::json!([1.0, -0.5]));
    assert_eq!(v["reduction"]["d"], serde_json::json!([0.5, -1.0]));

    fs::write(
        &path,
        r#"{"M": 2, "l": 1, "lambda": 0.1, "burns": [{"t": 0, "m": 2}], "t_final": 1}"#,
    )
    .unwrap();
    assert_eq!(
        run(dir.path(), &["rocket", "--schedule", path.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn wigner_of_number_state() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_ok(dir.path(), &["wigner", "--N", "4", "--fock", "1", "--points", "101"]);
    assert!((v["integral"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((v["min_value"].as_f64().unwrap() + 1.0 / std::f64::consts::PI).abs() < 1e-3);
    let csv = fs::read_to_string(dir.path().join("wigner.csv")).unwrap();
    assert!(csv.starts_with("x,p,w\n"));
    assert_eq!(csv.lines().count(), 101 * 101 + 1);
}
