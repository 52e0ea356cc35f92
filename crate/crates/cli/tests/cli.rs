use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chaosrc_cli::manifest::{RunManifest, Status};
use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chaosrc"));
    c.env_remove("CHAOSRC_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tiny_config(dir: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "trials": 2,
        "profile": {"train_time": 30, "predict_time": 5, "reservoir": {"n": 60, "washout_steps": 100}}
    });
    chaosrc_cli::config::deep_merge(&mut cfg, extra);
    let path = dir.join(format!("cfg{}.json", std::fs::read_dir(dir).unwrap().count()));
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn gen_data_rows_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run(&["gen-data", "--horizon", "0", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = read(a.join("trajectory.csv"));
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next(), Some("t,x,y,z"));
    assert_eq!(csv, read(b.join("trajectory.csv")));
    assert_eq!(read(a.join("trajectory.json")), read(b.join("trajectory.json")));

    let cfg = tiny_config(tmp.path(), json!({"profile": {"solver": {"dt": 1e-3}}}));
    let c = tmp.path().join("c");
    let o = run(&["--config", s(&cfg), "gen-data", "--horizon", "10", "--out", s(&c)]);
    assert!(o.status.success());
    assert_eq!(read(c.join("trajectory.csv")).lines().count(), 10002);
    let sidecar: Value = serde_json::from_str(&read(c.join("trajectory.json"))).unwrap();
    assert_eq!(sidecar["samples"], 10001);
    assert_eq!(sidecar["solver"]["method"], "ABM54_PC");
}

#[test]
fn vgtt_report_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = run(&["vgtt", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("RK4_FIXED / ABM54_PC"), "{text}");
    let audit: Value = serde_json::from_str(&read(out.join("vgtt.json"))).unwrap();
    let v = audit["result"]["vpt_lyap"].as_f64().unwrap();
    assert!((20.0..=70.0).contains(&v), "{v}");

    // blow-up of an unstable explicit step is a numerical failure
    let cfg = tiny_config(tmp.path(), json!({"profile": {"train_time": 100, "solver": {"method": "RK4_FIXED", "dt": 0.5}}}));
    let o = run(&["--config", s(&cfg), "gen-data", "--horizon", "200", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(&tmp.path().join("x/run_manifest.json")).unwrap();
    assert_eq!(m.status, Status::Failed);
    assert!(m.error.is_some());

    let o = run(&["vgtt", "--dt", "-1", "--out", s(&tmp.path().join("y"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"profile": {"reservoir": {"radius": 0.5}}}"#).unwrap();
    let o = run(&["--config", s(&cfg), "run", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`radius`"));
    let o = run(&["--config", s(&tmp.path().join("missing.json")), "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    let o = run(&["run", "--trials", "many"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_trial_run_matches_core() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), json!({}));
    let out = tmp.path().join("r");
    let o = run(&["--config", s(&cfg), "--trials", "1", "--seed", "7", "run", "--lambda", "1e-6", "--out", s(&out)]);
    assert!(o.status.success());
    let csv = read(out.join("trials.csv"));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);

    let m = RunManifest::read(&out.join("run_manifest.json")).unwrap();
    assert_eq!(m.status, Status::Completed);
    assert_eq!(m.config.profile.base_seed, 7);
    assert!(m.finished_unix_ms.unwrap() >= m.started_unix_ms);
    let expected = chaosrc_core::harness::run_trial(&m.config.profile, 0).unwrap();
    let cols: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cols[3], "7");
    assert_eq!(cols[4].parse::<f64>().unwrap(), expected.vpt_rc);
    assert_eq!(cols[5].parse::<f64>().unwrap(), expected.vpt_benchmark);
    let doc: Value = serde_json::from_str(&read(out.join("trials.json"))).unwrap();
    assert_eq!(doc["cells"][0]["mean_vpt_rc"].as_f64().unwrap(), expected.vpt_rc);
    assert_eq!(doc["config"]["profile"]["lambda"], 1e-6);
}

#[test]
fn sweep_outputs_are_recomputable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), json!({"trials": 3}));
    let out = tmp.path().join("s");
    let o = run(&["--config", s(&cfg), "sweep", "--lambdas", "0,1e-6,1e-2", "--out", s(&out)]);
    assert!(o.status.success());
    let csv = read(out.join("sweep.csv"));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        [
            "cell_id", "lambda", "trial_index", "seed", "vpt_rc", "vpt_benchmark", "ratio", "slope_rc",
            "slope_benchmark", "early_estimate", "diverged", "exceeds_vgtt"
        ]
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    let doc: Value = serde_json::from_str(&read(out.join("sweep.json"))).unwrap();
    assert_eq!(doc["axes"][0]["values"], json!([0.0, 1e-6, 1e-2]));
    for c in 0..3 {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == c.to_string())
            .map(|r| r[4].parse().unwrap())
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let stored = doc["cells"][c]["mean_vpt_rc"].as_f64().unwrap();
        assert!((mean - stored).abs() <= 1e-12 * mean.abs().max(1.0));
    }

    let one = tmp.path().join("one");
    let o = run(&[
        "--config", s(&cfg), "--trials", "1", "sweep", "--kind", "radius-size", "--radii", "0.5", "--sizes", "40",
        "--out", s(&one),
    ]);
    assert!(o.status.success());
    let csv = read(one.join("sweep.csv"));
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("cell_id,radius,n,"));
}

#[test]
fn screen_single_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), json!({}));
    let out = tmp.path().join("sc");
    let o = run(&["--config", s(&cfg), "screen", "--lambdas", "1e-4", "--out", s(&out)]);
    assert!(o.status.success());
    let csv = read(out.join("screen.csv"));
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,0,"));
}

#[test]
fn replay_is_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), json!({"trials": 3}));
    let first = tmp.path().join("first");
    let o = run(&["--config", s(&cfg), "--workers", "1", "sweep", "--lambdas", "1e-8,1e-2", "--out", s(&first)]);
    assert!(o.status.success());
    let again = tmp.path().join("again");
    let o = run(&["replay", s(&first.join("run_manifest.json")), "--workers", "3", "--out", s(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["sweep.csv", "sweep.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
    let m = RunManifest::read(&again.join("run_manifest.json")).unwrap();
    assert_eq!(m.workers, 3);
    assert_eq!(m.replayed_from.as_deref(), Some(first.join("run_manifest.json").as_path()));
    assert_eq!(m.outputs, vec!["sweep.csv", "sweep.json"]);

    let o = run(&["replay", s(&first.join("run_manifest.json")), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env-out");
    let o = bin()
        .args(["gen-data", "--horizon", "1"])
        .env("CHAOSRC_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(out.join("trajectory.csv").exists());
    assert!(out.join("run_manifest.json").exists());
}
