use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levelflow"));
    c.env_remove("LEVELFLOW_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const FLAT: &str = r#"{
  "name": "flat",
  "chart": {"kind": "conformal", "region": {"kind": "annulus", "outer": 7.38905609893065}, "factor": {"name": "flat"}},
  "field": {"kind": "dirichlet", "R": 7.38905609893065, "t1": 0.0, "t2": -2.0},
  "analysis": {"t_grid": {"lo": -2.0, "hi": 0.0, "n": 20}, "n_samples": 512}
}"#;

fn cap(c: f64) -> String {
    format!(
        r#"{{
  "chart": {{"kind": "conformal", "region": {{"kind": "punctured_disc", "radius": 1.0}},
            "factor": {{"name": "quadratic_lambda", "c": {c}}}}},
  "analysis": {{"radii": [0.05, 0.02, 0.01], "n_samples": 256}}
}}"#
    )
}

#[test]
fn hyperbolic_example_reports_unit_scaled_second_derivative() {
    let out = run(&["examples", "hyperbolic"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    let min = r["summary"]["hyperbolic"]["min_lnL_pp_sin2"].as_f64().unwrap();
    assert!((min - 1.0).abs() <= 1e-6, "{min}");
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["tolerances"]["convexity"].is_number());
}

#[test]
fn flat_convexity_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let out = run(&["convexity", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_stdout(&out);
    let d = r["summary"]["convexity"]["min_second_difference"].as_f64().unwrap();
    assert!(d.abs() <= 1e-8, "{d}");
}

#[test]
fn counterexample_limit_and_sign_flip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cap.json", &cap(-0.1));
    let out = run(&["counterexample", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    let limit = r["summary"]["predicted_limit"].as_f64().unwrap();
    assert!((limit + 15.7914).abs() <= 0.02 * 15.7914);
    for d in r["summary"]["defects"].as_array().unwrap() {
        assert!((d.as_f64().unwrap() + 15.7914).abs() <= 0.02 * 15.7914);
    }
    let cfg = write_config(dir.path(), "cup.json", &cap(0.1));
    let r = json_stdout(&run(&["counterexample", "--config", &cfg]));
    assert!(r["summary"]["defects"][0].as_f64().unwrap() > 15.0);
}

#[test]
fn config_errors_exit_2_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = FLAT.replace("\"n_samples\": 512", "\"n_samples\": 512, \"colour\": 1");
    let cfg = write_config(dir.path(), "bad.json", &bad);
    let out = run(&["convexity", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("colour"), "{err}");

    let bad = FLAT.replace("\"R\": 7.38905609893065", "\"R\": 0.5");
    let cfg = write_config(dir.path(), "bad_r.json", &bad);
    let out = run(&["profile", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let out = run(&["profile"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["profile", "--config", "/nonexistent/levelflow.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn positive_curvature_atom_fails_the_bic_check() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
  "chart": {"kind": "conical", "singularities": [{"z": {"x": 1.5, "y": 0.0}, "alpha": -0.5}]},
  "field": {"kind": "dirichlet", "R": 7.38905609893065, "t1": 0.0, "t2": -2.0},
  "analysis": {"t_grid": {"lo": -2.0, "hi": 0.0, "n": 100}, "mollified_profiles": false}
}"#;
    let cfg = write_config(dir.path(), "cone.json", body);
    let out = run(&["bic", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let r = json_stdout(&out);
    assert_eq!(r["summary"]["convexity"]["pass"], Value::Bool(false));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("out{threads}"));
        let out = run(&[
            "profile",
            "--config",
            &cfg,
            "--format",
            "csv",
            "--threads",
            threads,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        files.push((
            std::fs::read(out_dir.join("profile.csv")).unwrap(),
            std::fs::read(out_dir.join("profile.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let csv = String::from_utf8(files[0].0.clone()).unwrap();
    assert!(csv.starts_with("t,L,Lp,Lpp,lnL_pp,L_fd_p,L_fd_pp,aux_invgrad2\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.json", FLAT);
    let a = bin().args(["profile", "--config", &cfg]).env("LEVELFLOW_THREADS", "2").output().unwrap();
    let b = run(&["profile", "--config", &cfg]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let bad = bin().args(["profile", "--config", &cfg]).env("LEVELFLOW_THREADS", "0").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn residual_suite_on_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
  "seed": 3,
  "chart": {"kind": "conformal", "region": {"kind": "annulus", "outer": 2.0}, "factor": {"name": "quadratic_lambda", "c": -0.1}},
  "field": {"kind": "dirichlet", "R": 2.0, "t1": 0.0, "t2": -0.6931471805599453},
  "analysis": {"points": {"kind": "annulus", "r_in": 1.05, "r_out": 1.6, "n": 30}, "equations": ["pde1", "pde1_star", "pde2"]}
}"#;
    let cfg = write_config(dir.path(), "cap.json", body);
    let out = run(&["residuals", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json_stdout(&out);
    assert!(r["summary"]["identities"]["max_kato"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["table"]["rows"].as_array().unwrap().len(), 30);
}

#[test]
fn hyperbolic_audit_passes() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
  "chart": {"kind": "warped", "lambda": 7.38905609893065, "t_min": -3.5, "t_max": 3.5},
  "field": {"kind": "catalog", "name": "warped_arctan"},
  "analysis": {
    "audits": [{"quantity": "phi_k", "case": "case1"}, {"quantity": "phi_k", "case": "case2"}],
    "audit_domain": {"kind": "warped_band", "t_min": -1.5, "t_max": 1.5},
    "audit_grid": {"interior": 48, "boundary": 128}
  }
}"#;
    let cfg = write_config(dir.path(), "hyp.json", body);
    let out = run(&["audit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    for a in r["summary"]["audits"].as_array().unwrap() {
        assert_eq!(a["verdict"], "pass");
    }
}

#[test]
fn other_examples_pass() {
    for name in ["flat", "sphere-cap", "conical"] {
        let out = run(&["examples", name]);
        assert_eq!(out.status.code(), Some(0), "{name}");
    }
}
