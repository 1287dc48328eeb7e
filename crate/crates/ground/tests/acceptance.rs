//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs the in-process criteria, then exercises the `rvops` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use rvops_ground::acceptance::{self, CriterionResult};

fn rvops(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvops")).args(args).output().expect("rvops binary runs")
}

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn cli_determinism(dir: &Path) -> (bool, String) {
    let scen = scenario_file("straight_into_rock.scen");
    let mut runs = Vec::new();
    for i in 0..2 {
        let truth = dir.join(format!("truth{i}.jsonl"));
        let out = rvops(&["scenario", "run", scen.to_str().unwrap(), "--truth-log", truth.to_str().unwrap()]);
        if !out.status.success() {
            return (false, format!("scenario run failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        runs.push((out.stdout, std::fs::read(&truth).unwrap_or_default()));
    }
    let mut scenes = Vec::new();
    for i in 0..2 {
        let path = dir.join(format!("scene{i}.json"));
        let out = rvops(&["gen-scene", "--seed", "7", "--out", path.to_str().unwrap()]);
        if !out.status.success() {
            return (false, "gen-scene failed".into());
        }
        scenes.push(std::fs::read(&path).unwrap_or_default());
    }
    let metrics = runs[0].0 == runs[1].0 && !runs[0].0.is_empty();
    let truth = runs[0].1 == runs[1].1 && !runs[0].1.is_empty();
    let scene = scenes[0] == scenes[1] && !scenes[0].is_empty();
    (metrics && truth && scene, format!("metrics stdout identical: {metrics}, truth logs identical: {truth}, gen-scene files identical: {scene}"))
}

fn cli_safety() -> (bool, String) {
    let scen = scenario_file("straight_into_rock.scen");
    let mut collisions = Vec::new();
    for mode in ["off", "on"] {
        let out = rvops(&["scenario", "run", scen.to_str().unwrap(), "--safety", mode]);
        let v: serde_json::Value = match serde_json::from_slice(&out.stdout) {
            Ok(v) => v,
            Err(e) => return (false, format!("metrics not JSON with safety {mode}: {e}")),
        };
        collisions.push(v["collisions"].as_u64().unwrap_or(u64::MAX));
    }
    let usage = rvops(&[]).status.code();
    let ok = collisions[0] >= 1 && collisions[1] == 0 && usage == Some(1);
    (ok, format!("collisions safety off {} / on {}; no arguments exits {usage:?}", collisions[0], collisions[1]))
}

fn run_cli(name: &'static str, f: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = f();
    CriterionResult { name, passed, detail, elapsed: start.elapsed() }
}

fn main() {
    let mut results = acceptance::run_all(&[], |r| println!("{}", r.line()));
    let dir = tempfile::tempdir().expect("temp dir");
    for r in [run_cli("cli-determinism", || cli_determinism(dir.path())), run_cli("cli-safety", cli_safety)] {
        println!("{}", r.line());
        results.push(r);
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
