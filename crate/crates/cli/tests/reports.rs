use std::process::Command;

use serde_json::Value;
use stoilow_cli::{run_scenario, Scenario, REPORT_SCHEMA};

const EVERY_KIND: &str = r#"{
  "map": "pow2",
  "render": true,
  "seed": 3,
  "tasks": [
    {"kind": "normal", "at": [0, 0], "radius": 0.1},
    {"kind": "lift", "center": [0, 0], "radius": 0.25, "path": [[0.16, 0], [0, 0.16]], "from": [0.4, 0]},
    {"kind": "raylifts", "at": [0, 0], "dir": [0.6, 0.8]},
    {"kind": "degree", "at": [0, 0], "rho": 0.1},
    {"kind": "branch", "box": [-1, -1, 1, 1], "cell": 0.02},
    {"kind": "factor", "at": [0, 0], "cell": 0.01},
    {"kind": "conservation", "at": [0, 0], "radius": 0.2, "probes": 20},
    {"kind": "regularity", "cell": 0.02},
    {"kind": "degree", "at": [0.2, 0.2], "rho": 0.1, "samples": 8},
    {"kind": "normal", "at": [50, 0]}
  ]
}"#;

fn validate(report: &Value) {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(report) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "report violates schema: {msgs:#?}");
}

#[test]
fn every_task_kind_validates_against_the_schema() {
    let s = Scenario::parse(EVERY_KIND).unwrap();
    let run = run_scenario(&s);
    let report: Value = serde_json::from_str(&run.report.to_json()).unwrap();
    validate(&report);
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 10);
    for (i, r) in results.iter().enumerate().take(8) {
        assert_eq!(r["status"], "ok", "task {i}: {r}");
        assert_eq!(r["svg"], format!("task-{i}.svg"));
    }
    assert_eq!(results[8]["error"]["code"], "InvalidArgument");
    assert_eq!(results[9]["error"]["code"], "OutOfDomain");
    assert!(run.file("chart-5.json").is_some());
}

#[test]
fn rerunning_is_byte_identical_apart_from_timing() {
    let s = Scenario::parse(EVERY_KIND).unwrap();
    let a = run_scenario(&s);
    let b = run_scenario(&s);
    assert_eq!(a.report.to_json_untimed(), b.report.to_json_untimed());
    assert_eq!(a.files, b.files);
}

#[test]
fn scenario_examples() {
    let s = Scenario::parse(r#"{"map": "pow2", "tasks": [{"kind": "degree", "at": [0, 0], "rho": 0.1}]}"#).unwrap();
    let r = run_scenario(&s).report;
    assert_eq!(r.results[0].result().unwrap()["degree"], 2);

    let s = Scenario::parse(r#"{"map": "cubic", "tasks": [{"kind": "branch", "box": [-2, -2, 2, 2], "cell": 0.01}]}"#)
        .unwrap();
    let r = run_scenario(&s).report;
    let pts = r.results[0].result().unwrap()["branch_points"].as_array().unwrap().clone();
    assert_eq!(pts.len(), 2);
    for p in pts {
        let x = p["location"][0].as_f64().unwrap();
        assert!((x.abs() - 1.0).abs() < 0.02);
    }
}

#[test]
fn figures_follow_the_rendering_contract() {
    let s = Scenario::parse(
        r#"{"map": "pow2", "render": true, "tasks": [
            {"kind": "lift", "center": [0, 0], "radius": 0.25, "path": [[0.16, 0], [0, 0.16]], "from": [0.4, 0]},
            {"kind": "branch", "box": [0.3, 0.3, 0.8, 0.8], "cell": 0.02},
            {"kind": "normal", "at": [0, 0], "radius": 0.1}
        ]}"#,
    )
    .unwrap();
    let run = run_scenario(&s);
    let lift = run.file("task-0.svg").unwrap();
    assert_eq!(lift.matches("<rect fill=\"white\"").count(), 2, "two panels");
    assert_eq!(lift.matches("<polyline").count(), 2);

    let empty = run.file("task-1.svg").unwrap();
    assert!(empty.contains("stroke-dasharray"));
    assert!(!empty.contains("<circle"));

    let normal = run.file("task-2.svg").unwrap();
    // one merged region path, one image circle plus the two center markers
    assert_eq!(normal.matches("fill-opacity").count(), 1);
    assert_eq!(normal.matches("<circle").count(), 3);
}

fn stoilow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stoilow")).args(args).output().unwrap()
}

#[test]
fn exit_status_tracks_task_success() {
    let ok = stoilow(&["degree", "--map", "pow4", "--at", "0,0", "--rho", "0.1"]);
    assert!(ok.status.success());
    let report: Value = serde_json::from_slice(&ok.stdout).unwrap();
    validate(&report);
    assert_eq!(report["results"][0]["result"]["degree"], 4);

    let failed = stoilow(&["normal", "--map", "re", "--at", "0,0"]);
    assert_eq!(failed.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&failed.stdout).unwrap();
    validate(&report);
    assert_eq!(report["results"][0]["error"]["code"], "NoRadiusFound");
}

#[test]
fn malformed_scenarios_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"map": "pow2", "tasks": [{"kind": "conservation", "at": [0, 0], "radius": -1}]}"#,
    )
    .unwrap();
    let out = stoilow(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("tasks[0].radius"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn run_writes_report_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    let out = dir.path().join("out");
    std::fs::write(
        &scenario,
        r#"{"map": "pow3", "tasks": [{"kind": "degree", "at": [0, 0], "rho": 0.1}]}"#,
    )
    .unwrap();
    let o = stoilow(&["run", scenario.to_str().unwrap(), "--svg", "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    validate(&report);
    assert_eq!(report["scenario"]["seed"], 9);
    assert!(out.join("task-0.svg").exists());
}
