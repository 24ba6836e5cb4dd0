use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spanlayout(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spanlayout"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPANLAYOUT_OUT")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr_error(out: &Output) -> Value {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().expect("stderr line");
    serde_json::from_str(last).expect("json error")
}

#[test]
fn generate_place_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = stdout_json(&spanlayout(
        &["generate", "--items", "60", "--queries", "150", "--density", "5", "--seed", "3", "--out", "w"],
        d,
    ));
    assert_eq!(gen["items"], 60);
    assert_eq!(gen["queries"], 150);
    assert!(d.join("w/workload.hgr").exists() && d.join("w/workload.weights").exists());

    let placed = spanlayout(
        &[
            "place", "w/workload.hgr", "--weights", "w/workload.weights", "--algo", "lmbr", "--n", "8", "--c", "10",
            "--seed", "1", "--output", "p.json", "--format", "json",
        ],
        d,
    );
    let summary = stdout_json(&placed);
    assert_eq!(summary["algorithm"], "lmbr");
    assert!(summary["max_load"].as_u64().unwrap() <= 10);

    let eval = stdout_json(&spanlayout(&["evaluate", "p.json", "w/workload.hgr"], d));
    assert_eq!(eval["queries"], 150);
    assert_eq!(eval["average_exact"], summary["avg_span_exact"]);

    let csv = spanlayout(&["evaluate", "p.json", "w/workload.hgr", "--format", "csv"], d);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("edge,multiplicity,span"));
}

#[test]
fn partition_respects_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    spanlayout(&["generate", "--items", "40", "--queries", "80", "--density", "4", "--out", "."], d);
    let out = stdout_json(&spanlayout(&["partition", "workload.hgr", "--k", "4", "--c", "12"], d));
    let parts = out["partitions"].as_array().unwrap();
    assert_eq!(parts.len(), 4);
    assert!(parts.iter().all(|p| p.as_array().unwrap().len() <= 12));
    let total: usize = parts.iter().map(|p| p.as_array().unwrap().len()).sum();
    assert_eq!(total, 40);
}

#[test]
fn missing_file_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = stderr_error(&spanlayout(&["evaluate", "nope.json", "nope.hgr"], dir.path()));
    assert_eq!(err["kind"], "io");
    assert!(err["error"].as_str().unwrap().contains("No such file"));
}

#[test]
fn malformed_hypergraph_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.hgr"), "2 3\n1 2\n1 x\n").unwrap();
    let err = stderr_error(&spanlayout(&["place", "bad.hgr", "--algo", "hpa", "--n", "2", "--c", "2"], dir.path()));
    assert_eq!(err["kind"], "parse");
    assert!(err["error"].as_str().unwrap().contains("line 3"), "{err}");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = spanlayout(&["place", "x.hgr", "--algo", "bogus", "--n", "2", "--c", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["kind"], "usage");
}

#[test]
fn infeasible_capacity_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h.hgr"), "1 4\n1 2 3 4\n").unwrap();
    let err = stderr_error(&spanlayout(&["place", "h.hgr", "--algo", "ihpa", "--n", "1", "--c", "3"], dir.path()));
    assert_eq!(err["kind"], "infeasible");
}

#[test]
fn oracle_span_agrees_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("h.hgr"), "6 8\n1 2 3\n3 4 6\n4 6 7\n5 8\n1 5 8\n3 5\n").unwrap();
    std::fs::write(d.join("p.txt"), "0 0\n1 0\n2 0\n3 1\n4 1\n5 2\n6 2\n7 3\n").unwrap();
    let out = spanlayout(&["oracle", "span", "p.txt", "h.hgr"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("edge,multiplicity,greedy,exact"));
    let spans: Vec<(usize, usize)> = rows
        .map(|l| {
            let f: Vec<usize> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[2], f[3])
        })
        .collect();
    assert_eq!(spans, vec![(1, 1), (3, 3), (2, 2), (2, 2), (3, 3), (2, 2)]);
}

#[test]
fn experiment_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = serde_json::json!({
        "workload": { "item_count": 40, "query_count": 100, "density": 4.0 },
        "algorithms": ["hpa", "random", "ihpa"],
        "capacity": { "fixed": 10 },
        "sweep_axis": "partitions",
        "sweep_values": [4, 6],
        "trials": 2
    });
    std::fs::write(d.join("exp.json"), cfg.to_string()).unwrap();
    let out = spanlayout(&["experiment", "exp.json", "--out", "res"], d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(d.join("res/results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,sweep_axis,sweep_value,seed,avg_span,replicas,max_load,runtime_ms")
    );
    assert_eq!(lines.count(), 3 * 2 * 2);
    assert!(d.join("res/summary.csv").exists() && d.join("res/errors.csv").exists());
}

#[test]
fn experiment_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.json"), r#"{"algorithms":["hpa"],"bogus":1}"#).unwrap();
    let err = stderr_error(&spanlayout(&["experiment", "exp.json"], dir.path()));
    assert!(err["error"].as_str().unwrap().contains("bogus"), "{err}");
}
