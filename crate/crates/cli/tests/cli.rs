use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use psrl_zsg::planner::{solve_sg, PlannerConfig, PlanningSolution};
use psrl_zsg::sg_model::gen_random_game;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psrl-zsg"))
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_matrix_from_stdin() {
    let mut child = bin()
        .arg("solve-matrix")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"[[1, -1], [-1, 1]]").unwrap();
    let v = stdout_json(&child.wait_with_output().unwrap());
    assert!(v["value"].as_f64().unwrap().abs() < 1e-9);
    assert!(v["gap"].as_f64().unwrap() <= 1e-9);
    for p in v["row_strategy"].as_array().unwrap().iter().chain(v["col_strategy"].as_array().unwrap()) {
        assert!((p.as_f64().unwrap() - 0.5).abs() < 1e-6);
    }
}

#[test]
fn solve_matrix_rejects_ragged_input() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.json");
    std::fs::write(&path, "[[1, 2], [3]]").unwrap();
    let out = bin().arg("solve-matrix").arg(&path).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn plan_output_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let game = gen_random_game(4, 2, 3, 0.1, 17).unwrap();
    let path = tmp.path().join("game.json");
    std::fs::write(&path, game.to_json()).unwrap();
    let out = bin().args(["plan", "--game"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let from_cli: PlanningSolution = serde_json::from_slice(&out.stdout).unwrap();
    let direct = solve_sg(&game, &PlannerConfig::default()).unwrap();
    assert!((from_cli.gain - direct.gain).abs() <= 1e-15);
    for (a, b) in from_cli.bias.iter().zip(&direct.bias) {
        assert!((a - b).abs() <= 1e-15);
    }
    assert_eq!(from_cli, direct);
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const CONFIG: &str = r#"
[game]
source = "prior"
n_states = 3
n_actions_1 = 2
n_actions_2 = 2

[opponent]
kind = "uniform"

[run]
horizon = 2000
seed = 5
"#;

#[test]
fn run_then_check_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out_dir = tmp.path().join("out");
    let v = stdout_json(&bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out_dir).output().unwrap());
    assert_eq!(v["T"], 2000);
    for f in ["trace.csv", "episodes.csv", "meta.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let report = stdout_json(&bin().args(["check-bounds", "--trace"]).arg(&out_dir).output().unwrap());
    assert_eq!(report["accounting_ok"], true);
    assert_eq!(report["episodes"]["growth_rule"], true);
}

#[test]
fn sweep_writes_seed_directories_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out_dir = tmp.path().join("sweep");
    let v = stdout_json(
        &bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--seeds", "3", "--parallel", "2", "--out"])
            .arg(&out_dir)
            .output()
            .unwrap(),
    );
    assert_eq!(v["n_runs"], 3);
    for seed in 5..8 {
        assert!(out_dir.join(format!("seed_{seed}")).join("trace.csv").exists());
    }
    assert!(out_dir.join("summary.csv").exists());
}

#[test]
fn run_without_output_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}
