use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sie::cli::RunConfig;

fn sie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sie")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sie(&args)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn linear_reset_five_periods_logs_five_unit_dwells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lr.json", r#"{"model": "linear-reset", "simulate": {"periods": 5}}"#);
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("impacts.csv"));
    assert_eq!(rows[0].first().unwrap(), "k");
    assert_eq!(rows[0].last().unwrap(), "T_I_k");
    assert_eq!(rows.len(), 6);
    for row in &rows[1..] {
        let dwell: f64 = row.last().unwrap().parse().unwrap();
        assert!((dwell - 1.0).abs() < 1e-8, "{row:?}");
    }
    let traj = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(traj[0], ["t", "x_1", "x_2", "segment_index"]);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["termination"]["kind"], "horizon-reached");
}

#[test]
fn bouncing_ball_exits_with_guard_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bb.json", r#"{"model": "bouncing-ball", "simulate": {"horizon": 10.0}}"#);
    let out = dir.path().join("out");
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let meta = fs::read_to_string(out.join("meta.json")).unwrap();
    assert!(meta.contains("zeno-guard"), "{meta}");
}

#[test]
fn unknown_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"model": "biped"}"#);
    let o = run("orbit", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown model"));
}

#[test]
fn unknown_config_keys_and_missing_files_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"model": "linear-reset", "simulate": {"period": 5}}"#);
    assert_eq!(run("simulate", &cfg, &dir.path().join("out"), &[]).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(run("simulate", &missing, &dir.path().join("out"), &[]).status.code(), Some(1));
    assert_eq!(sie(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn orbit_reports_verdict_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w.json", r#"{"model": "rimless-wheel"}"#);
    let out = dir.path().join("out");
    let o = run("orbit", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("LES: spectral_radius=5.0000"), "{stdout}");
    let file: sie::cli::OrbitFile = serde_json::from_str(&fs::read_to_string(out.join("orbit.json")).unwrap()).unwrap();
    assert!(file.assumptions.all_hold());
    let samples = csv_rows(&out.join("orbit_samples.csv"));
    assert_eq!(samples[0], ["tau", "tau_backward", "x_1", "x_2"]);
    assert_eq!(samples.len() - 1, file.orbit.n_samples);

    // the orbit file feeds the distance column of a simulation
    let sim = write_config(
        dir.path(),
        "sim.json",
        &format!(
            r#"{{"model": "rimless-wheel", "simulate": {{"periods": 3, "orbit_file": {:?}}}}}"#,
            out.join("orbit.json")
        ),
    );
    let o = run("simulate", &sim, &dir.path().join("sim"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = csv_rows(&dir.path().join("sim/trajectory.csv"));
    assert_eq!(traj[0][3], "dist_to_orbit");
}

#[test]
fn orbit_below_capture_speed_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w.json", r#"{"model": "rimless-wheel", "orbit": {"guess": [0.4726990816987241, 1.2]}}"#);
    let out = dir.path().join("out");
    let o = run("orbit", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn certify_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": "linear-reset", "certify": {"samples_per_radius": 50, "radii": [0.001, 0.1, 10.0]}}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("certify-prop1", &cfg, &out, &[]).status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("prop1.json")).unwrap()).unwrap();
    assert_eq!(rep["violations"], 0);
    assert_eq!(rep["n_samples"], 150);
}

#[test]
fn sweep_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"model": "rimless-wheel", "seed": 3,
            "sweep": {"offsets": [0.05], "u_amps": [0.0, 0.02], "v_amps": [0.0, 0.004], "trials": 6}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("iss-sweep", &cfg, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run("iss-sweep", &cfg, &b, &["--threads", "3"]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("cells.csv")).unwrap(), fs::read(b.join("cells.csv")).unwrap());
    assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
    // a different seed changes the random impulses
    let c = dir.path().join("c");
    assert_eq!(run("iss-sweep", &cfg, &c, &["--seed", "4"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("cells.csv")).unwrap(), fs::read(c.join("cells.csv")).unwrap());
    assert_eq!(csv_rows(&a.join("cells.csv")).len(), 5);
}

#[test]
fn validate_passes_for_catalog_models() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["linear-reset", "rimless-wheel", "vdp-adapter", "bouncing-ball"] {
        let cfg = write_config(dir.path(), "v.json", &format!(r#"{{"model": "{model}"}}"#));
        let out = dir.path().join(model);
        let o = run("validate", &cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(0), "{model}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("validation.json").exists());
    }
}

#[test]
fn config_round_trips_through_json() {
    let text = r#"{
        "model": "vdp-adapter",
        "params": {"mu": 0.3},
        "solver": {"event_tol": 1e-11, "t_cap": 50.0},
        "guards": {"k_max": 500},
        "inputs": {"v": {"kind": "iid-uniform", "bound": [0.1], "seed": 1}},
        "simulate": {"horizon": 12.0, "x0": [2.0, 0.1]},
        "orbit": {"guess": [2.0, 0.0], "margin": 1e-5},
        "certify": {"samples_per_radius": 10},
        "validate": {"probes": [[1.0, 1.0]]}
    }"#;
    let cfg = RunConfig::from_json(text).unwrap();
    let back = RunConfig::from_json(&serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, back);
}

#[test]
fn bundled_configs_parse_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    for (name, expected) in [
        ("linear_reset.json", 0),
        ("rimless_wheel.json", 0),
        ("vdp_adapter.json", 0),
        ("bouncing_ball.json", 2),
    ] {
        let path = configs.join(name);
        RunConfig::load(&path).unwrap();
        let o = run("simulate", &path, &dir.path().join(name), &[]);
        assert_eq!(o.status.code(), Some(expected), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
