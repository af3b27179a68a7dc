use std::path::Path;
use std::process::{Command, Output};

use equity_opf::harness::SolveReport;
use equity_opf::{builtin_case, run_solve, SolverOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equity-opf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

#[test]
fn solve_five_bus_reports_full_dispatch() {
    let out = run(&["solve", "builtin:five_bus"]);
    assert_eq!(out.status.code(), Some(0));
    let report: SolveReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.status, "converged");
    assert_eq!(report.buses.len(), 5);
    assert_eq!(report.generators.len(), 5);
    assert_eq!(report.aggregators.len(), 7);
    assert_eq!(report.lines.len(), 6);
    assert!(report.max_violation_pu < 1e-6);
    for line in &report.lines {
        assert!(line.flow_from_to_mw <= line.s_max_mw * (1.0 + 1e-6));
        assert!(line.flow_to_from_mw <= line.s_max_mw * (1.0 + 1e-6));
    }
}

#[test]
fn solve_json_matches_library_run() {
    let out = run(&["solve", "five_bus"]);
    assert_eq!(out.status.code(), Some(0));
    let report: SolveReport = serde_json::from_str(&stdout(&out)).unwrap();
    let lib = run_solve(&builtin_case("five_bus").unwrap(), &SolverOptions::default()).unwrap();
    assert_eq!(report.iterations, lib.solution.iterations);
    assert_eq!(report.metrics, lib.metrics);
}

#[test]
fn solve_report_round_trips_through_json() {
    let out = run(&["solve", "builtin:five_bus"]);
    let text = stdout(&out);
    let report: SolveReport = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap();
    let back: SolveReport = serde_json::from_str(&again).unwrap();
    assert_eq!(report, back);
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&["sweep", "builtin:five_bus", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 72);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 9 + 7);
    assert_eq!(header[0], "scale_pct");
    assert!(header[9].starts_with("norm_sat_"));
    assert!(lines[1].starts_with("10.0,converged,"));
    assert!(lines[71].starts_with("150.0,converged,"));
}

#[test]
fn sweep_json_output() {
    let out = run(&[
        "sweep", "five_bus", "--from", "50", "--to", "60", "--step", "5", "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[2]["scale_pct"], 60.0);
}

#[test]
fn missing_case_file_is_an_input_error() {
    let out = run(&["solve", "/nonexistent/case.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_builtin_is_an_input_error() {
    let out = run(&["solve", "builtin:ieee118"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_are_input_errors() {
    assert_eq!(run(&["solve"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "five_bus", "--tol", "-1"]).status.code(), Some(2));
    let reversed = run(&["sweep", "five_bus", "--from", "100", "--to", "50"]);
    assert_eq!(reversed.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn iteration_limit_exits_with_one() {
    let out = run(&["solve", "five_bus", "--max-iter", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let report: SolveReport = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report.status, "iteration_limit");
}

#[test]
fn exported_case_solves_like_the_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("five_bus.toml");
    let out = run(&["export", "builtin:five_bus", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(&path).exists());

    let from_file = run(&["solve", path.to_str().unwrap()]);
    let from_builtin = run(&["solve", "builtin:five_bus"]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(stdout(&from_file), stdout(&from_builtin));
}

#[test]
fn exported_case_with_broken_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    let text = stdout(&run(&["export", "five_bus"]));
    let broken = text.replacen("s_base = 100.0", "s_base = -100.0", 1);
    assert_ne!(text, broken);
    std::fs::write(&path, broken).unwrap();
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_passes_derivative_audit() {
    let out = run(&["check", "builtin:five_bus", "--points", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["violations"].as_array().unwrap().is_empty());
    assert_eq!(v["audit"]["passed"], true);
    assert_eq!(v["audit"]["points"], 10);
}

#[test]
fn oracle_agrees_on_copper_plate() {
    let out = run(&["oracle", "five_bus"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["solver_status"], "converged");
    assert!(v["relative_difference"].as_f64().unwrap() < 1e-5);
}

#[test]
fn seed_changes_synthetic_case() {
    let a = stdout(&run(&["export", "rts24"]));
    let b = stdout(&run(&["export", "rts24", "--seed", "25"]));
    let c = stdout(&run(&["export", "rts24", "--seed", "24"]));
    assert_ne!(a, b);
    assert_eq!(a, c);
}
