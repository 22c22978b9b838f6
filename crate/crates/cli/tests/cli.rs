use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qfridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfridge"))
        .args(args)
        .env_remove("QFRIDGE_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn record(dir: &Path, kind: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{kind}.json"))).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Small optimizer budget on the cheapest feasible family.
const QUICK_MPEMBA: &str = r#"{
    "schema_version": 1,
    "family": "local-qutrit",
    "optimizer": { "starts": 2, "max_evaluations": 600 },
    "time_grid": { "start_factor": 0.1, "end_factor": 20, "points": 60 }
}"#;

#[test]
fn config_subcommand_applies_overrides() {
    let out = qfridge(&[
        "config",
        "--seed",
        "9",
        "--no-cold-bath",
        "--family",
        "local-both",
    ]);
    assert!(out.status.success());
    let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["optimizer"]["seed"], 9);
    assert_eq!(cfg["model"]["kappa_c"], 0.0);
    assert_eq!(cfg["family"], "local-both");
}

#[test]
fn printed_config_is_accepted_back() {
    let tmp = TempDir::new().unwrap();
    let first = qfridge(&["config", "--epsilon", "1e-6"]);
    let path = write_config(tmp.path(), std::str::from_utf8(&first.stdout).unwrap());
    let second = qfridge(&["config", "--config", &path]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn spectrum_reports_block_census() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("out");
    let out = qfridge(&["spectrum", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("6 + 4x2 + 22 = 36"));

    let rows = csv_rows(&dir.join("spectrum.csv"));
    assert_eq!(rows[0], ["index", "re", "im", "block"]);
    assert_eq!(rows.len(), 37);
    let re: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(re.windows(2).all(|w| w[0] >= w[1]));

    let rec = record(&dir, "spectrum");
    assert_eq!(rec["kind"], "spectrum");
    assert_eq!(rec["outputs"]["ergodic"], true);
    assert!(
        rec["outputs"]["max_biorthonormality_residual"]
            .as_f64()
            .unwrap()
            < 1e-10
    );
    assert_eq!(
        csv_rows(&dir.join("biorthonormality.csv")).len(),
        36 * 36 + 1
    );
}

#[test]
fn uncoupled_system_writes_outputs_then_fails() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "model": {"E0": 0.7, "E1": 1, "g": 0.001, "Tc": 1, "Th": 3,
            "Tw": 1, "kappa_c": 0, "kappa_h": 0, "kappa_w": 0}}"#,
    );
    let dir = tmp.path().join("out");
    let out = qfridge(&["spectrum", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not unique"));
    assert_eq!(record(&dir, "spectrum")["outputs"]["ergodic"], false);
}

#[test]
fn invalid_configs_are_rejected_before_any_output() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("out");
    for body in [
        r#"{"schema_version": 1, "model": {"E0": 0.7, "E1": 1, "g": 0.9, "Tc": 1, "Th": 3,
            "Tw": 1, "kappa_c": 1e-4, "kappa_h": 1e-4, "kappa_w": 1e-4}}"#,
        r#"{"schema_version": 1, "thresholds": {"epsilon": -1}}"#,
        r#"{"schema_version": 1, "unexpected": true}"#,
        r#"{"schema_version": 3}"#,
    ] {
        let cfg = write_config(tmp.path(), body);
        let out = qfridge(&["spectrum", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(!dir.exists());
    }
}

#[test]
fn steady_sweep_is_row_major_with_named_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "steady_sweep": {
            "x": {"param": "kappa_c", "start": 1e-5, "end": 1e-3, "points": 3},
            "y": {"param": "kappa_h", "start": 1e-4, "end": 1e-2, "points": 2}}}"#,
    );
    let dir = tmp.path().join("out");
    let out = qfridge(&[
        "steady-sweep",
        "--config",
        &cfg,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.join("steady_sweep.csv"));
    assert_eq!(rows[0], ["kappa_c", "kappa_h", "delta_T", "T_s"]);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[1][0], rows[2][0]);
    assert_eq!(rows[1][1], "0.0001");
    assert_eq!(rows[6][0], "0.001");
    for r in &rows[1..] {
        let (dt, ts): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((ts - 1.0 - dt).abs() < 1e-12);
    }
    assert!(record(&dir, "steady_sweep")["failures"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn evolve_writes_a_converging_trajectory() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("out");
    let out = qfridge(&["evolve", "--out", dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.join("trajectory.csv"));
    assert_eq!(rows[0], ["t", "distance", "qubit_temperature"]);
    assert_eq!(rows.len(), 402);
    assert_eq!(rows[1][0], "0");
    let last: f64 = rows.last().unwrap()[1].parse().unwrap();
    assert!(last < 1e-5);
    let rec = record(&dir, "evolve");
    assert!(rec["outputs"]["t_ss"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_qfridge"))
        .arg("spectrum")
        .env("QFRIDGE_OUT", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("spectrum.json").exists());
}

#[test]
fn mpemba_run_is_reproducible_and_complete() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), QUICK_MPEMBA);
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let out = qfridge(&[
            "mpemba",
            "--config",
            &cfg,
            "--seed",
            "5",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        dir
    };
    let (a, b) = (run("a"), run("b"));
    let (ra, rb) = (record(&a, "mpemba"), record(&b, "mpemba"));
    assert_eq!(ra["outputs"], rb["outputs"]);
    assert_eq!(
        fs::read_to_string(a.join("candidate.csv")).unwrap(),
        fs::read_to_string(b.join("candidate.csv")).unwrap()
    );

    let o = &ra["outputs"];
    assert_eq!(o["family"], "local-qutrit");
    assert_eq!(o["unitary_params"].as_array().unwrap().len(), 9);
    for key in [
        "feasible",
        "constraint_residual",
        "distance_gain",
        "lambda2",
        "lambda3",
        "t_ss",
        "t_cool",
        "verification",
    ] {
        assert!(!o[key].is_null(), "missing {key}");
    }
    assert_eq!(ra["config"]["optimizer"]["seed"], 5);
    assert_eq!(csv_rows(&a.join("reference.csv")).len(), 62);
}

#[test]
fn timing_sweep_reports_every_point() {
    let tmp = TempDir::new().unwrap();
    let mut cfg: Value = serde_json::from_str(QUICK_MPEMBA).unwrap();
    cfg["timing_sweep"] = serde_json::json!({
        "x": {"param": "g", "start": 0.001, "end": 0.001, "points": 1},
        "y": {"param": "kappa", "start": 1e-4, "end": 1e-3, "points": 2}
    });
    let path = write_config(tmp.path(), &cfg.to_string());
    let dir = tmp.path().join("out");
    let out = qfridge(&[
        "timing-sweep",
        "--config",
        &path,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.join("timing_sweep.csv"));
    assert_eq!(rows[0], ["g", "kappa", "t_M", "t_ss", "feasible"]);
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert!(r[4] == "true" || r[4] == "false");
        assert!(r[3].parse::<f64>().unwrap() > 0.0);
    }
}
