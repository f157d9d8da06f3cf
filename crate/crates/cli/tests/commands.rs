use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hosim_cli::*;
use hosim_core::evaluation::{OracleMode, METRICS_HEADER};
use tempfile::TempDir;

const SMALL: &str = r#"{
  "topology": {"kind": "community", "n_communities": 2, "cells_per_community": 6, "inter_edges": 1},
  "mobility": {"kind": "community_flow", "q": 0.9},
  "n_ues": 20, "n_events": 1500, "seed": 5, "window": 100,
  "regions": {"count": 2, "capacity": 7},
  "message_log": true
}"#;

fn scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.json");
    fs::write(&p, text).unwrap();
    p
}

fn hosim(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hosim")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn run_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    let report = cmd_run(&sc, &out, None).unwrap();
    let metrics = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(metrics.lines().count(), 1 + 15);
    assert!(out.join(FLOW_FILE).exists());
    assert!(out.join(MESSAGES_FILE).exists());
    assert_eq!(read_report(&out).unwrap(), report);
    assert_eq!(report.digest.len(), 64);
    assert_eq!(report.summary.seed, 5);
}

#[test]
fn digest_ignores_formatting_and_key_order() {
    let a = scenario_digest(r#"{"a": 1, "b": {"c": 2, "d": [1, 2]}}"#).unwrap();
    let b = scenario_digest("{\"b\":{\"d\":[1,2],\"c\":2},\n  \"a\":1}").unwrap();
    let c = scenario_digest(r#"{"a": 2, "b": {"c": 2, "d": [1, 2]}}"#).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn seed_override_changes_outputs_not_schema() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), SMALL);
    let a = cmd_run(&sc, &tmp.path().join("a"), None).unwrap();
    let b = cmd_run(&sc, &tmp.path().join("b"), Some(99)).unwrap();
    assert_eq!(a.digest, b.digest);
    assert_eq!(b.summary.seed, 99);
    let fa = fs::read_to_string(tmp.path().join("a").join(FLOW_FILE)).unwrap();
    let fb = fs::read_to_string(tmp.path().join("b").join(FLOW_FILE)).unwrap();
    assert_ne!(fa, fb);
    let keys = |dir: &str| {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join(dir).join(SUMMARY_FILE)).unwrap()).unwrap();
        v.as_object().unwrap().keys().cloned().collect::<Vec<_>>()
    };
    assert_eq!(keys("a"), keys("b"));
}

#[test]
fn binary_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    let (code, stdout, _) = hosim(&["run", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("final ratio") && stdout.contains("total signaling"));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, SMALL.replacen("\"seed\"", "\"sede\": 1, \"seed\"", 1)).unwrap();
    let (code, _, stderr) = hosim(&["run", "--scenario", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("sede"), "{stderr}");

    let missing = tmp.path().join("nope.json");
    let (code, _, _) = hosim(&["run", "--scenario", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);

    let (code, _, _) = hosim(&["sweep", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", ""]);
    assert_eq!(code, 2);

    let (code, _, stderr) = hosim(&["report", tmp.path().join("ghost").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("ghost"));
}

#[test]
fn invalid_scenario_values_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), &SMALL.replace("\"capacity\": 7", "\"capacity\": 5"));
    let err = cmd_run(&sc, &tmp.path().join("r"), None).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn sweep_runs_every_seed() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), SMALL);
    let out = tmp.path().join("sweep");
    let agg = cmd_sweep(&sc, &parse_seeds("1..4").unwrap(), &out, 2).unwrap();
    for s in 1..=4 {
        assert!(out.join(format!("seed_{s}")).join(SUMMARY_FILE).exists());
    }
    assert_eq!(agg.final_ratio.unwrap().n, 4);
    assert!(agg.failed_seeds.is_empty());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(out.join("aggregate.json").exists());
}

#[test]
fn sweep_reports_failed_seeds_and_keeps_going() {
    let tmp = TempDir::new().unwrap();
    let trace = tmp.path().join("trace.csv");
    fs::write(&trace, "time,ue,source,target\n0,0,0,1\n1,0,1,0\n").unwrap();
    let sc = scenario(
        tmp.path(),
        r#"{"topology": {"kind": "explicit", "n_cells": 2, "edges": [[0, 1]]},
            "mobility": {"kind": "trace", "path": "trace.csv"},
            "regions": {"count": 1, "capacity": 2}, "window": 1}"#,
    );
    let out = tmp.path().join("sweep");
    cmd_sweep(&sc, &[1, 2], &out, 1).unwrap();
    fs::remove_file(&trace).unwrap();
    let err = cmd_sweep(&sc, &[1, 2], &out, 2).unwrap_err();
    assert_ne!(err.exit_code(), 0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.matches("failed").count(), 2);
}

#[test]
fn oracle_path_fixture_and_guards() {
    let tmp = TempDir::new().unwrap();
    let flow = tmp.path().join("flow.csv");
    fs::write(&flow, "source,target,count\n0,1,5\n1,0,5\n1,2,1\n2,1,1\n2,3,5\n3,2,5\n").unwrap();
    let src = FlowSource::Csv(flow.clone());
    let r = cmd_oracle(&src, 2, 2, OracleMode::Exhaustive, Some(tmp.path())).unwrap();
    assert_eq!(r.cut, 2.0);
    assert_eq!(r.blocks, vec![vec![0, 1], vec![2, 3]]);
    assert!(tmp.path().join(PARTITION_FILE).exists());
    assert_eq!(cmd_oracle(&src, 1, 4, OracleMode::BranchAndBound, None).unwrap().cut, 0.0);
    assert_eq!(cmd_oracle(&src, 1, 3, OracleMode::BranchAndBound, None).unwrap_err().exit_code(), 1);

    let big = tmp.path().join("big.csv");
    let rows: String = (0..16).map(|i| format!("{i},{},1\n", i + 1)).collect();
    fs::write(&big, format!("source,target,count\n{rows}")).unwrap();
    let err = cmd_oracle(&FlowSource::Csv(big), 2, 9, OracleMode::Exhaustive, None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("17"), "{err}");
}

#[test]
fn oracle_reads_run_directory() {
    let tmp = TempDir::new().unwrap();
    let sc = scenario(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    cmd_run(&sc, &out, None).unwrap();
    let r = cmd_oracle(&FlowSource::RunDir(out), 2, 7, OracleMode::BranchAndBound, None).unwrap();
    assert_eq!(r.n_cells, 12);
    assert!(r.ratio < 0.2);
}

#[test]
fn report_rows_per_run_and_mode() {
    let tmp = TempDir::new().unwrap();
    let active = scenario(tmp.path(), SMALL);
    cmd_run(&active, &tmp.path().join("active"), None).unwrap();
    let frozen = tmp.path().join("frozen.json");
    fs::write(&frozen, SMALL.replace("\"window\": 100", "\"window\": 100, \"mode\": \"frozen\", \"init_policy\": \"geographic\"")).unwrap();
    cmd_run(&frozen, &tmp.path().join("frozen"), None).unwrap();
    let a = tmp.path().join("active");
    let f = tmp.path().join("frozen");
    let rows = cmd_report(&[a.as_path(), f.as_path()]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].label, "active");
    assert_eq!(rows[1].label, "static");
    assert_eq!(rows[1].assignment_messages, 0);
    let (table, csv) = render_report(&rows);
    assert_eq!(table.lines().count(), 3);
    assert_eq!(csv.lines().next().unwrap(), REPORT_HEADER);
    let missing = tmp.path().join("missing");
    let err = cmd_report(&[a.as_path(), missing.as_path()]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("missing"));
}
