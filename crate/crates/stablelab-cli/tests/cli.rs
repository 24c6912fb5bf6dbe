use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stablelab"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn shipped_json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(shipped(name)).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, value: &Value) -> PathBuf {
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small audit configuration: the shipped α = 1.5 setup with fewer trials.
fn small_audit(quad_tol: f64) -> Value {
    let mut c = shipped_json("alpha-1.5.json");
    c["quad_tol"] = quad_tol.into();
    c["half_width"] = 12.0.into();
    c["spacing"] = 0.02.into();
    c["audit"] = serde_json::json!({
        "axiom_trials": 20, "comparison_trials": 5, "scheme_n": 8,
        "moment_n_max": 4, "mollifier_functions": 2, "mollifier_epsilons": [0.2, 0.1]
    });
    c
}

#[test]
fn validate_example_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let o = run(&["validate"], &shipped("alpha-1.5.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(dir.path().join("conditions.json"));
    assert_eq!(r["pass"], true);
    let q0 = r["q0_theoretical"].as_f64().unwrap();
    assert!((q0 - 0.2).abs() < 1e-12);
    for m in r["members"].as_array().unwrap() {
        let q = m["report"]["q0_empirical"].as_f64().unwrap();
        assert!(q >= q0 - 0.05 && q <= q0 + 0.1, "fitted decay {q}");
    }
    let csv = std::fs::read_to_string(dir.path().join("conditions.csv")).unwrap();
    assert!(csv.starts_with("k1,k2,n,"));
    assert!(dir.path().join("validate_metadata.json").exists());
}

#[test]
fn beta_not_above_alpha_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let mut c = shipped_json("alpha-1.5.json");
    c["beta"] = 1.5.into();
    let o = run(&["validate"], &write_config(&dir, &c), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`beta`"), "{}", stderr(&o));
}

#[test]
fn asymmetric_tails_below_one_are_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let mut c = shipped_json("alpha-0.5.json");
    c["a1"] = 0.03.into();
    let o = run(&["validate"], &write_config(&dir, &c), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("`a2`") && e.contains("symmetry"), "{e}");
}

#[test]
fn malformed_invocations_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let mut c = shipped_json("alpha-1.5.json");
    c["bogus"] = 1.into();
    let o = run(&["validate"], &write_config(&dir, &c), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));

    let o = run(&["validate"], &dir.path().join("missing.json"), dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = bin().args(["converge", "--no-such-flag"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn converge_needs_a_geometric_list_of_four() {
    let dir = TempDir::new().unwrap();
    let mut c = shipped_json("degenerate-0.5.json");
    c["n_list"] = serde_json::json!([8, 16, 32]);
    let o = run(&["converge"], &write_config(&dir, &c), dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`n_list`"));
}

#[test]
fn degenerate_converge_agrees_with_the_fourier_oracle() {
    let dir = TempDir::new().unwrap();
    let o = run(&["converge"], &shipped("degenerate-0.5.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(dir.path().join("rate_report.json"));
    assert_eq!(r["rate"]["reference"]["method"], "fourier_oracle");
    let rows = r["oracle_agreement"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row["pass"], true, "{row}");
    }
    assert!(r["rate"]["fit"]["slope"].as_f64().is_some());
    let csv = std::fs::read_to_string(dir.path().join("rate_report.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,value,certificate,reference,error"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn constant_phi_has_no_error_and_no_slope() {
    let dir = TempDir::new().unwrap();
    let mut c = shipped_json("degenerate-1.5.json");
    c["phi"] = serde_json::json!({"kind": "constant", "value": 0.7});
    let o = run(&["converge"], &write_config(&dir, &c), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(dir.path().join("rate_report.json"));
    for row in r["rate"]["rows"].as_array().unwrap() {
        assert!(row["error"].as_f64().unwrap() <= 1e-12);
    }
    assert!(r["rate"]["fit"].is_null());
}

#[test]
fn audit_passes_and_slack_scales_with_quad_tol() {
    let mut tolerances = Vec::new();
    for tol in [1e-9, 1e-7] {
        let dir = TempDir::new().unwrap();
        let o = run(&["audit", "--seed", "3"], &write_config(&dir, &small_audit(tol)), dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r = read_json(dir.path().join("audit.json"));
        assert_eq!(r["pass"], true);
        tolerances.push(r["axioms"]["tolerance"].as_f64().unwrap());
    }
    assert!((tolerances[1] / tolerances[0] - 100.0).abs() < 1e-9);
}

#[test]
fn non_monotone_interpolation_fails_the_comparison_audit() {
    let dir = TempDir::new().unwrap();
    let mut c = small_audit(1e-9);
    c["half_width"] = 10.0.into();
    c["spacing"] = 1.0.into();
    c["interpolation"] = serde_json::json!({"kind": "sharpened", "strength": 1.0});
    c["audit"]["scheme_n"] = 64.into();
    let o = run(&["audit"], &write_config(&dir, &c), dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let r = read_json(dir.path().join("audit.json"));
    assert_eq!(r["comparison"]["pass"], false);
    assert_eq!(r["axioms"]["pass"], true);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for d in &dirs {
        let o = run(&["audit", "--seed", "11"], &write_config(d, &small_audit(1e-9)), d.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |d: &TempDir| std::fs::read(d.path().join("audit.json")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
}

#[test]
fn rate_table_prints_the_grid() {
    let dir = TempDir::new().unwrap();
    let o = bin().args(["rate-table", "--alphas", "0.5,1.5", "--betas", "1.0,1.8", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,delta,beta,q0,gamma");
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().any(|l| l.starts_with("1.5,1,1.8,")));
    assert!(dir.path().join("rate_table.csv").exists());

    let o = bin().args(["rate-table", "--alphas", "2.5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
