//! Command-line contract: exit codes, table shapes, sidecars, determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_orbital-floquet"));
    cmd.args(args).current_dir(dir).env_remove("OF_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn compare_methods_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["compare-methods", "--out", "res"], dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("res/compare-methods.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "E1_GHz,omega_R_sopt_GHz,omega_R_monodromy_GHz,omega_R_matrix_GHz,omega_R_lz_GHz"
    );
    assert_eq!(lines.len(), 72);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    assert!(lines[1].starts_with("0,"));
    assert!(lines[71].starts_with("7,"));
    // Below the crossing threshold the Landau-Zener estimate is undefined.
    assert!(lines[1].ends_with(",NaN"));
    assert!(!lines[71].contains("NaN"));
}

#[test]
fn sidecar_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grids": {"drive": {"start": 1, "stop": 4, "step": 1}}, "physics": {"noise": {"n_samples": 40}}}"#,
    );
    let o = run(
        &[
            "decoherence",
            "--config",
            &cfg,
            "--out",
            "a",
            "--seed",
            "11",
        ],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        &[
            "decoherence",
            "--config",
            "a/decoherence.meta.json",
            "--out",
            "b",
        ],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["decoherence.csv", "decoherence.trajectories.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let meta: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("b/decoherence.meta.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["command"], "decoherence");
    let header = fs::read_to_string(dir.path().join("a/decoherence.csv")).unwrap();
    assert!(header.starts_with("E1_GHz,omega_R_GHz,T2_ns,window_limited\n"));
}

#[test]
fn seed_changes_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grids": {"drive": {"values": [3.0]}}, "physics": {"noise": {"n_samples": 20}}}"#,
    );
    for (out, seed) in [("s1", "1"), ("s1b", "1"), ("s2", "2")] {
        let o = run(
            &[
                "decoherence",
                "--config",
                &cfg,
                "--out",
                out,
                "--seed",
                seed,
            ],
            dir.path(),
            &[],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("decoherence.trajectories.csv")).unwrap();
    assert_eq!(read("s1"), read("s1b"));
    assert_ne!(read("s1"), read("s2"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grids": {"drive": {"values": [0, 3]}, "detuning": {"start": -0.2, "stop": 0.2, "step": 0.1},
            "evolve_window_ns": [0, 10]}}"#,
    );
    let one = run(
        &[
            "ple-sweep",
            "--config",
            &cfg,
            "--out",
            "t1",
            "--threads",
            "1",
        ],
        dir.path(),
        &[],
    );
    let many = run(
        &["ple-sweep", "--config", &cfg, "--out", "t4"],
        dir.path(),
        &[("OF_THREADS", "4")],
    );
    assert!(one.status.success() && many.status.success());
    assert_eq!(
        fs::read(dir.path().join("t1/ple-sweep.csv")).unwrap(),
        fs::read(dir.path().join("t4/ple-sweep.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"physics": {"f_m": -1}}"#, "f_m must be positive"),
        (r#"{"physics": {"laser": {"omega_lz": 1}}}"#, "omega_lz"),
        ("{\"seed\": 1,\n \"grids\": [}", "line 2"),
        (r#"{"grids": {"drive": {"start": 1}}}"#, "grids.drive"),
    ];
    for (i, (json, needle)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), json);
        let o = run(&["rabi-freq", "--config", &cfg], dir.path(), &[]);
        assert_eq!(o.status.code(), Some(1), "{json}");
        let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
        assert_eq!(err["error"]["kind"], "config");
        assert!(
            err["error"]["message"].as_str().unwrap().contains(needle),
            "{}",
            stderr(&o)
        );
    }
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grids": {"drive": {"values": [3]}, "rtol": 1e-300, "atol": 1e-300,
            "histogram": {"diffusion_draws": 0, "t_end_ns": 101}}}"#,
    );
    let o = run(
        &["rabi-time", "--config", &cfg, "--out", "x"],
        dir.path(),
        &[],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "numerical");
}

#[test]
fn json_output_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"grids": {"drive": {"values": [0, 1]}}, "output": {"format": "json"}}"#,
    );
    let o = run(
        &["floquet-spectrum", "--config", &cfg, "--out", "j"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("j/floquet-spectrum.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["columns"][1], "detuning_GHz");
    let rows = doc["rows"].as_array().unwrap();
    // Undriven: exactly the two bare lines, one at zero detuning.
    let undriven: Vec<&serde_json::Value> = rows.iter().filter(|r| r[0] == 0.0).collect();
    assert_eq!(undriven.len(), 2);
    assert!(undriven.iter().any(|r| r[1].as_f64().unwrap().abs() < 1e-9));
    assert!(rows.iter().filter(|r| r[0] == 1.0).count() > 2);
}

#[test]
fn rabi_freq_and_rabi_time_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "f.json",
        r#"{"grids": {"drive": {"values": [0, 3.5]}}}"#,
    );
    let o = run(
        &["rabi-freq", "--config", &cfg, "--out", "r"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("r/rabi-freq.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    let exact: f64 = text
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{"grids": {"drive": {"values": [3.5]}, "histogram": {"diffusion_draws": 8}}}"#,
    );
    let o = run(
        &["rabi-time", "--config", &cfg, "--out", "r"],
        dir.path(),
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fit = fs::read_to_string(dir.path().join("r/rabi-time.fit.csv")).unwrap();
    assert!(fit.starts_with("E1_GHz,omega_R_GHz,T2_ns,amplitude_percent,fit_ok\n"));
    let row: Vec<f64> = fit
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .take(3)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(
        (row[1] / exact - 1.0).abs() < 0.05,
        "fitted {} vs exact {exact}",
        row[1]
    );
}
