mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::scenario_path;
use dronenet::problems::{build_perfect, read_lp_objective, read_solution, LpNames};
use dronenet::sim::{substream, Draw};

fn dronenet(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dronenet"));
    cmd.args(args);
    cmd.args(paths);
    cmd.output().unwrap()
}

fn small_scenario(dir: &Path) -> std::path::PathBuf {
    let text = std::fs::read_to_string(scenario_path("desk.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["horizon_slots"] = 3.into();
    doc["users_per_slot"] = serde_json::json!([60, 140, 120]);
    let path = dir.join("small.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

#[test]
fn validate_echoes_parameters() {
    let out = dronenet(&["validate", "--scenario"], &[&scenario_path("baseline.json")]);
    assert_eq!(out.status.code(), Some(0));
    let echo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["drones"], 6);
    assert_eq!(echo["mbs"], 4);
    assert_eq!(echo["serving_sites"], 16);
}

#[test]
fn missing_scenario_is_an_input_error() {
    let out = dronenet(&["validate", "--scenario", "/nonexistent/scenario.json"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ParseError (I/O)"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(dronenet(&["compare"], &[]).status.code(), Some(1));
    assert_eq!(dronenet(&["frobnicate"], &[]).status.code(), Some(1));
    assert_eq!(dronenet(&["--help"], &[]).status.code(), Some(0));
    let bad_case = dronenet(&["compare", "--cases", "clairvoyant", "--scenario"], &[&scenario_path("desk.json")]);
    assert_eq!(bad_case.status.code(), Some(1));
    let bad_limit = dronenet(&["solve", "--time-limit-s", "0", "--scenario"], &[&scenario_path("desk.json")]);
    assert_eq!(bad_limit.status.code(), Some(1));
}

#[test]
fn compare_writes_csvs_and_perfect_wins() {
    let dir = tempfile::tempdir().unwrap();
    let file = small_scenario(dir.path());
    let out_dir = dir.path().join("out");
    let out = dronenet(&["compare", "--cases", "zero,perfect", "--seeds", "2", "--scenario"], &[&file, Path::new("--out"), &out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mean = |case: &str| -> f64 {
        let row = summary.lines().find(|l| l.starts_with(&format!("{case},"))).unwrap();
        row.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert!(mean("perfect") <= mean("zero") * (1.0 + 1e-9));
    let traces = std::fs::read_to_string(out_dir.join("traces.csv")).unwrap();
    assert_eq!(traces.lines().count(), 1 + 2 * 2 * 3);
    let placements = std::fs::read_to_string(out_dir.join("placements.csv")).unwrap();
    assert!(placements.starts_with("case,seed,slot,site_0,site_1,mbs_0,mbs_1\n"));
}

#[test]
fn export_and_solution_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = small_scenario(dir.path());
    let lp = dir.path().join("model.lp");
    let out = dronenet(&["export-lp", "--cases", "perfect", "--seed", "5", "--scenario"], &[&file, Path::new("--out"), &lp]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let s = dronenet::scenario::load_scenario(&file).unwrap();
    let problem = build_perfect(&s, &Draw::new(&s, substream(5, "re", 0)).phi).unwrap();
    let names = LpNames::new(&problem);
    let (constant, coefs) = read_lp_objective(&std::fs::read_to_string(&lp).unwrap()).unwrap();
    assert_eq!(constant, problem.bilp.constant);
    for (j, &c) in problem.bilp.cost.iter().enumerate() {
        assert_eq!(coefs.get(&names.vars[j]).copied().unwrap_or(0.0), c, "{}", names.vars[j]);
    }

    let sol_dir = dir.path().join("solve");
    let out = dronenet(&["solve", "--cases", "perfect", "--seed", "5", "--scenario"], &[&file, Path::new("--out"), &sol_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let objective = summary["solves"][0]["objective_j"].as_f64().unwrap();
    let x = read_solution(&std::fs::read_to_string(sol_dir.join("perfect.sol")).unwrap(), &names).unwrap();
    assert!(problem.bilp.is_feasible(&x));
    assert!((problem.bilp.objective(&x) - objective).abs() <= 1e-6 * objective);
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sol_dir.join("perfect_schedule.json")).unwrap()).unwrap();
    assert_eq!(plan[0]["sites"].as_array().unwrap().len(), 3);
}

#[test]
fn tiny_time_limit_reports_cap_exceeded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dronenet(
        &["solve", "--cases", "perfect", "--time-limit-s", "0.001", "--scenario"],
        &[&scenario_path("desk.json"), Path::new("--out"), dir.path()],
    );
    assert_eq!(out.status.code(), Some(2));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["solves"][0]["status"]["status"], "cap_exceeded");
}

#[test]
fn rollout_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let file = small_scenario(dir.path());
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = dronenet(&["rollout", "--cases", "zero,partial", "--seeds", "2", "--uncertainty-pct", "30", "--scenario"], &[
            &file,
            Path::new("--out"),
            &out_dir,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (out.stdout, std::fs::read(out_dir.join("traces.csv")).unwrap(), std::fs::read(out_dir.join("placements.csv")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
