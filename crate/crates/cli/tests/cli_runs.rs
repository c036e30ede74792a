use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qps() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qps"));
    c.env_remove("QPS_OUT_DIR");
    c
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path) -> Output {
    qps().arg("run").arg(config).arg("--out").arg(out).output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const MARKOV: &str = r#"{"mode": "markov", "channels": [{"a": [1, 0], "b": [0, -1]}], "grid": {"t_end": 2, "n_points": 64}}"#;

#[test]
fn markov_single_channel_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MARKOV);
    let out = dir.path().join("out");
    let o = run(&cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["regime"], "Markovian");
    assert_eq!(r["scalars"]["covariance"]["P"], 0.5);
    assert_eq!(r["scalars"]["covariance"]["X"], 0.5);
    assert_eq!(r["scalars"]["covariance"]["Q"], 0.0);
    assert_eq!(r["scalars"]["saturation"], "exact");
    assert_eq!(r["config"], serde_json::from_str::<Value>(MARKOV).unwrap());
    assert_eq!(r["files"][0]["name"], "markov_coherence.csv");
    assert_eq!(r["files"][0]["rows"], 64);
    let csv = fs::read_to_string(out.join("markov_coherence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn nonmarkov_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "nonmarkov", "grid": {"t_end": 5, "n_points": 128},
            "channels": [{"a": [1, 0], "b": [0, -1], "omega": 1,
                          "noise": {"kind": "exponential", "tau_c": 1},
                          "dissipation": {"kind": "exponential", "tau_c": 1}}]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("nonmarkov.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,D_pp,D_xx,D_px,Lambda,P,X,Q,det_residual,masked");
    // the first sample has Lambda = 0 and is masked
    assert!(lines.next().unwrap().ends_with(",1"));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 10);
        let t: f64 = fields[0].parse().unwrap();
        assert!(t > 0.0);
    }
    let r = report(&out);
    assert_eq!(r["files"][0]["rows"], 128);
    assert!(r["scalars"]["recoherence_interval_count"].is_number());
}

#[test]
fn derivative_check_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mode": "derivative-check", "grid": {"t_end": 6.283185307179586, "n_points": 129}}"#);
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    let err = report(&out)["scalars"]["fd_vs_analytic_max_rel_err"].as_f64().unwrap();
    assert!(err < 1e-4);
}

#[test]
fn multilevel_report_has_decoherence_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "multilevel", "grid": {"t_end": 4, "n_points": 64},
            "multilevel": {"coefficients": [[0.6, 0], [0, 0.8]], "overlap": {"kind": "exponential_decay", "tau_d": 0.5}}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    let r = report(&out);
    assert!((r["scalars"]["tau_D"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(r["files"][1]["rows"], 4);
}

#[test]
fn never_decohering_overlaps_leave_tau_null() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "multilevel", "grid": {"t_end": 4, "n_points": 64},
            "multilevel": {"coefficients": [[0.6, 0], [0, 0.8]], "overlap": {"kind": "constant", "value": 1}}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(0));
    let r = report(&out);
    assert!(r["scalars"]["tau_D"].is_null());
    assert_eq!(r["details"]["tau_D_reached"], false);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"channels": [], "grid": {"t_end": 1, "n_points": 64}}"#);
    let o = qps().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode"));

    let cfg = write_config(dir.path(), "{ not json");
    let o = qps().arg("run").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));

    let o = qps().arg("validate").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MARKOV);
    let o = qps().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("valid markov"));
}

#[test]
fn unresolvable_kernel_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "nonmarkov", "grid": {"t_end": 5, "n_points": 64},
            "channels": [{"a": [1, 0], "b": [0, -1], "omega": 1,
                          "noise": {"kind": "narrow_delta", "width": 1e-10},
                          "dissipation": {"kind": "exponential", "tau_c": 1}}]}"#,
    );
    let out = dir.path().join("out");
    let o = run(&cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["status"], "failed");
    assert_eq!(r["error"]["kind"], "numerical");
    assert_eq!(r["error"]["exit_code"], 2);
    assert!(r["config"].is_object());
}

#[test]
fn zero_mode_frequency_masks_everything() {
    // Lambda(t) vanishes identically when omega = 0
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"mode": "nonmarkov", "grid": {"t_end": 5, "n_points": 64},
            "channels": [{"a": [1, 0], "b": [0, -1], "omega": 0,
                          "noise": {"kind": "exponential", "tau_c": 1},
                          "dissipation": {"kind": "exponential", "tau_c": 1}}]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&cfg, &out).status.code(), Some(2));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let cfg = write_config(dir.path(), MARKOV);
    let o = qps().arg("run").arg(&cfg).env("QPS_OUT_DIR", &env_dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("report.json").exists());

    let cfg_dir = dir.path().join("from_config");
    let text = MARKOV[..MARKOV.len() - 1].to_string()
        + &format!(r#", "output": {{"directory": {}}}}}"#, serde_json::to_string(&cfg_dir).unwrap());
    let cfg = write_config(dir.path(), &text);
    let o = qps().arg("run").arg(&cfg).env("QPS_OUT_DIR", &env_dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(cfg_dir.join("report.json").exists());

    let flag_dir = dir.path().join("from_flag");
    let o = qps().arg("run").arg(&cfg).arg("--out").arg(&flag_dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("report.json").exists());
}

#[test]
fn format_flag_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MARKOV);
    let out = dir.path().join("csv_only");
    let o = qps().arg("run").arg(&cfg).arg("--out").arg(&out).arg("--format").arg("csv").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("markov_coherence.csv").exists());
    assert!(!out.join("report.json").exists());

    let out = dir.path().join("all");
    let o = qps().arg("run").arg(&cfg).arg("--out").arg(&out).arg("--format").arg("csv,json,gnuplot").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    let names: Vec<&str> = r["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["markov_coherence.csv", "plot.gp"]);
    assert!(fs::read_to_string(out.join("plot.gp")).unwrap().contains("markov_coherence.csv"));
}

#[test]
fn version_prints_schema() {
    let o = qps().arg("version").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.starts_with("qps ") && s.contains("schema 1"));
}
