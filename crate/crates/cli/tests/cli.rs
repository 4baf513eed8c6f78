use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SINGLE_RECT: &str = r#"{
    "name": "single-sharp",
    "flux": {"kind": "counterexample"},
    "field": {
        "background": 3,
        "patches": [{"value": 4, "velocity": {"x1": 0, "x2": 1},
                     "support0": [{"lo": {"x1": 0, "x2": 0}, "hi": {"x1": 1, "x2": 3}}]}],
        "horizon": {"start": 0, "end": null}
    },
    "points": [{"x1": "1/2", "x2": 5}, {"x1": "3/2", "x2": 5}, {"x1": "1/4", "x2": "3/2"}],
    "t_end": 12
}"#;

#[test]
fn verify_psi_all_pass() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("psi");
    let o = run(&["verify-psi", "--k", "0..4", "--samples", "1000"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["passed"], true);
    let claims = r["claims"].as_array().unwrap();
    assert_eq!(claims.len(), 5);
    assert!(claims.iter().all(|c| c["pass"] == true && c["value"]["oracle_agree"] == 1000));
    let csv = fs::read_to_string(out.join("psi.csv")).unwrap();
    assert!(csv.starts_with("k,samples,oracle_agree,digit_agree,flagged,disjoint,rects\n0,1000,1000,1000,0,true,"));
}

#[test]
fn illposed_residual_table_has_zeros_below_threshold() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ill");
    let o = run(&["illposed", "--n", "1..5", "--cos-beta", "1/3"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("residuals.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for row in &rows {
        let zero = ["1/5", "1/4", "1/3"].contains(&row[0]);
        assert_eq!(row[1], if zero { "true" } else { "false" }, "{row:?}");
        assert_eq!(row[2] == "0", zero, "{row:?}");
    }
    let r = report(&out);
    let weak = r["claims"].as_array().unwrap().iter().find(|c| c["claim"].as_str().unwrap().starts_with("weak limit: cell")).unwrap();
    assert_eq!(weak["pass"], true);
    assert!(out.join("pattern_n5.csv").exists());
}

#[test]
fn missing_flux_is_a_configuration_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "bad.json", r#"{"name": "no-flux", "points": []}"#);
    let o = run(&["trace", "--config", &cfg], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("flux"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn bad_arguments_exit_with_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["verify-psi", "--k", "4..1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["illposed", "--cos-beta", "0.3"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_is_exact_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "single.json", SINGLE_RECT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&["trace", "--config", &cfg], dir);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let shifts = fs::read_to_string(a.join("shifts.csv")).unwrap();
    assert_eq!(shifts, "point,shift1,shift2,stabilization_time\n0,0,1,6\n1,0,0,0\n2,0,1/2,2\n");
    for name in ["manifest.json", "report.json", "trajectories.csv", "shifts.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn event_limit_is_a_guard() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(&tmp, "single.json", SINGLE_RECT);
    let o = run(&["trace", "--config", &cfg, "--max-events", "1"], &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unbalanced_field_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "left.json",
        r#"{
            "flux": {"kind": "counterexample"},
            "field": {
                "background": 3,
                "patches": [{"value": 2, "velocity": {"x1": -1, "x2": 0},
                             "support0": [{"lo": {"x1": 0, "x2": 0}, "hi": {"x1": 3, "x2": 1}}]}],
                "horizon": {"start": 0, "end": null}
            }
        }"#,
    );
    let out = tmp.path().join("o");
    let o = run(&["verify-field", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["passed"], false);
}

#[test]
fn riemann_needs_a_scalar_flux() {
    let tmp = TempDir::new().unwrap();
    let planar = write_config(&tmp, "p.json", r#"{"flux": {"kind": "counterexample"}}"#);
    assert_eq!(run(&["riemann", "--config", &planar], &tmp.path().join("a")).status.code(), Some(2));
    let burgers = write_config(
        &tmp,
        "b.json",
        r#"{"flux": {"kind": "polynomial", "coeffs": [0, 0, 0.5]}, "riemann": {"left": 1, "right": 0, "cells": 2000}}"#,
    );
    let out = tmp.path().join("b");
    let o = run(&["riemann", "--config", &burgers], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let fan = fs::read_to_string(out.join("fan.csv")).unwrap();
    assert_eq!(fan, "kind,left,right,speed_lo,speed_hi\nshock,1,0,0.5,0.5\n");
}

#[test]
fn figures_and_default_output_root() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_combflow"))
        .args(["figures", "--k", "1"])
        .env("COMBFLOW_OUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("figures");
    for f in ["fig1_trajectories.csv", "fig2_combs.csv", "fig3_psi_stages.csv", "fig4_rho_n.csv", "fig5_eigenspaces.csv", "manifest.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    // One row per square after the last comb passage.
    let stages = fs::read_to_string(dir.join("fig3_psi_stages.csv")).unwrap();
    let last: Vec<&str> = stages.lines().filter(|l| l.split(',').nth(1) == Some("3")).collect();
    assert_eq!(last.len(), 64);
}

#[test]
fn compactness_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c");
    let o = run(&["compactness"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    let infos = r["claims"].as_array().unwrap().iter().filter(|c| c["pass"].is_null()).count();
    assert!(infos >= 1);
    let conv = fs::read_to_string(out.join("convergence_single.csv")).unwrap();
    assert_eq!(conv.lines().count(), 6);
}
