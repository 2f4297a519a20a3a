mod common;

use std::process::{Command, Output};

fn bbaudio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbaudio"))
        .args(args)
        .output()
        .expect("run bbaudio")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bbaudio(&["--help"]).status.code(), Some(0));
    assert_eq!(bbaudio(&["--version"]).status.code(), Some(0));
    assert_eq!(bbaudio(&["task1", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bbaudio(&[]).status.code(), Some(2));
    assert_eq!(bbaudio(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bbaudio(&["attack", "--family", "nope"]).status.code(), Some(2));
    assert_eq!(bbaudio(&["gen-data", "--per-class", "many"]).status.code(), Some(2));
}

#[test]
fn invalid_config_values_exit_two_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[attack]\ndelta_max = -1.0\n").unwrap();
    let out = bbaudio(&["task1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&out).trim()).expect("JSON error line");
    assert_eq!(err["error"], "config");

    let out = bbaudio(&[
        "gen-data",
        "--per-class",
        "5",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bbaudio(&["report", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn bad_worker_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_bbaudio"))
        .args(["task1", "--out", "/nonexistent/never"])
        .env(bbaudio::harness::pool::WORKERS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn gen_data_writes_a_thousand_clip_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("corpus");
    let out = bbaudio(&["gen-data", "--per-class", "100", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest = bbaudio::dataset::load_manifest(out_dir.join(bbaudio::dataset::MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.entries.len(), 1000);
    assert_eq!(manifest.count(bbaudio::dataset::Split::Train), 800);
}

#[test]
fn zo_attack_respects_budget() {
    let mut cfg = common::tiny("cli-attack");
    common::with_default_checkpoints(&cfg);
    cfg.attack.budget = 10_000;
    let path = cfg.output_dir.join("cli.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let out = bbaudio(&[
        "attack",
        "--config",
        path.to_str().unwrap(),
        "--family",
        "zo",
        "--budget",
        "10000",
        "--clips",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let records = std::fs::read_to_string(cfg.output_dir.join("attack/zeroth_order/records.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = records.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for l in lines {
        assert!(l["queries_used"].as_u64().unwrap() <= 10_000);
        assert!(l["linf"].as_f64().unwrap() <= cfg.attack.delta_max + 1e-12);
    }
}

#[test]
fn task1_twice_gives_identical_report_files() {
    let cfg = common::tiny("cli-task1");
    common::with_default_checkpoints(&cfg);
    let path = cfg.output_dir.join("cli.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let run = || {
        let out = bbaudio(&["task1", "--config", path.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let report = bbaudio::harness::ExperimentReport::load(cfg.output_dir.join("task1/report.json")).unwrap();
        let records = std::fs::read(cfg.output_dir.join("task1/records.jsonl")).unwrap();
        (report.without_timing().to_json().unwrap(), records)
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);

    let out = bbaudio(&["report", cfg.output_dir.join("task1").to_str().unwrap(), "--recompute"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
