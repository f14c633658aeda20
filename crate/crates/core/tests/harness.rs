mod common;

use std::path::Path;
use std::process::Command;

use psse::harness::{run_config, ExperimentConfig, RunOptions};

fn noisy_config(out: &Path, replay: Option<&Path>) -> ExperimentConfig {
    let text = serde_json::json!({
        "schema_version": 1,
        "name": "replay_check",
        "case": common::case_path("case14.m"),
        "truth": {"type": "random", "magnitude": [0.95, 1.05], "angle_pi": [-0.05, 0.05]},
        "plan": {"ordered_types": 7},
        "noise": {"vsq": 0.004, "flow": 0.008, "injection": 0.01},
        "corruption": {"model": "m1", "mean": 0.0, "stddev": 30.0, "fraction": 0.1},
        "init": "measured_magnitude",
        "normalize": true,
        "solvers": [
            {"type": "deterministic", "name": "prox-linear", "params": {"mu": 100, "rho": 100, "inner_iters": 150, "max_outer": 20}},
            {"type": "stochastic", "name": "stochastic", "params": {"max_epochs": 20}},
            {"type": "stochastic", "name": "accelerated", "minibatch": true,
             "params": {"constant_step": 0.8, "max_epochs": 20}},
            {"type": "wls", "name": "gauss-newton", "params": {"max_iters": 10}},
            {"type": "irls", "name": "irls", "params": {"max_iters": 20}}
        ],
        "seed": 7,
        "trials": 1,
        "output": out,
        "replay": replay,
    });
    ExperimentConfig::parse(&text.to_string()).unwrap()
}

/// Every trace column except wall-clock seconds.
fn deterministic_columns(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn replay_reproduces_traces_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let a = run_config(&noisy_config(&first, None)).unwrap();
    let b = run_config(&noisy_config(&second, Some(&first.join("trial_000")))).unwrap();
    for name in ["prox-linear", "stochastic", "accelerated", "gauss-newton", "irls"] {
        let file = format!("{name}.csv");
        let x = deterministic_columns(&first.join("trial_000").join(&file));
        let y = deterministic_columns(&second.join("trial_000").join(&file));
        assert!(x.len() > 1);
        assert_eq!(x, y, "{name}");
        let (sa, sb) = (a.solver(0, name).unwrap(), b.solver(0, name).unwrap());
        assert_eq!(sa.trials[0].final_rmse.to_bits(), sb.trials[0].final_rmse.to_bits());
    }
    assert_eq!(
        std::fs::read(first.join("trial_000/measurements.json")).unwrap(),
        std::fs::read(second.join("trial_000/measurements.json")).unwrap()
    );
}

#[test]
fn same_seed_same_summary() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_config(&noisy_config(&dir.path().join("a"), None)).unwrap();
    let b = run_config(&noisy_config(&dir.path().join("b"), None)).unwrap();
    for (pa, pb) in a.points.iter().zip(&b.points) {
        for (sa, sb) in pa.solvers.iter().zip(&pb.solvers) {
            assert_eq!(sa.final_rmse.mean.to_bits(), sb.final_rmse.mean.to_bits(), "{}", sa.name);
        }
    }
}

#[test]
fn unknown_solver_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = noisy_config(&dir.path().join("x"), None);
    let opts = RunOptions {
        solvers: Some(vec!["nope".into()]),
        ..RunOptions::default()
    };
    assert!(opts.apply(&mut cfg).is_err());
}

fn psse() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psse"))
}

#[test]
fn cli_rejects_empty_solver_list_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    let text = serde_json::json!({
        "schema_version": 1,
        "name": "empty",
        "case": common::case_path("case14.m"),
        "truth": {"type": "case"},
        "plan": {"kinds": ["vsq"]},
        "solvers": [],
        "seed": 1,
        "trials": 1,
        "output": dir.path().join("out"),
    });
    std::fs::write(&path, text.to_string()).unwrap();
    let status = psse().arg("run").arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = psse().arg("validate").arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_missing_config_exits_4() {
    let status = psse().args(["run", "/nonexistent/config.json"]).status().unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn cli_validates_shipped_configs_and_reports_case() {
    for cfg in ["ieee14_noiseless.json", "ieee118_outliers.json"] {
        let path = common::repo_root().join("experiments").join(cfg);
        let out = psse().arg("validate").arg(&path).output().unwrap();
        assert!(out.status.success(), "{cfg}");
    }
    let out = psse().arg("case-info").arg(common::case_path("case14.m")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("buses            14"));
    assert!(text.contains("all-kinds M      122"));
}

#[test]
fn cli_run_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = common::repo_root().join("experiments/ieee14_noiseless.json");
    let out = dir.path().join("run");
    let status = psse()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .args(["--solvers", "prox-linear,gauss-newton"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let solvers = summary["points"][0]["solvers"].as_array().unwrap();
    assert_eq!(solvers.len(), 2);
    assert!(out.join("trial_000/prox-linear.csv").exists());
}
