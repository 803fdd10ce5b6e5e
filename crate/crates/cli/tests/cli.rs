//! Exit-code contract and artifact checks for the binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_ntorrent-sim"))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

#[test]
fn default_run_exits_zero() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("completed"), "stdout: {stdout}");
}

#[test]
fn unknown_scenario_exits_one() {
    let out = run(&["--scenario", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn unknown_strategy_exits_one() {
    let out = run(&["--strategy", "flood"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_start_override_exits_one() {
    let out = run(&["--start", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["--scenario", "router-node-degree-4", "--start", "NOBODY=100"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn time_limit_exits_two_with_progress() {
    let out = run(&["--max-sim-time", "500"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("incomplete"), "stderr: {stderr}");
    assert!(stderr.contains("objects"), "stderr: {stderr}");
}

#[test]
fn writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let metrics = dir.path().join("metrics.csv");
    let out = run(&[
        "--scenario",
        "router-node-degree-4",
        "--trace-out",
        trace.to_str().unwrap(),
        "--metrics-out",
        metrics.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("time_ms,node,face,type,packets,kilobytes\n"));
    assert!(trace_text.lines().count() > 1);
    let metrics_text = std::fs::read_to_string(&metrics).unwrap();
    assert!(metrics_text
        .starts_with("node,role,interests_sent,interests_satisfied,isr,avg_delay_ms,finish_ms\n"));
    assert!(metrics_text.contains(",leecher,"));
}

#[test]
fn dump_tables_emits_json_lines() {
    let out = run(&["--dump-tables"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let json_lines: Vec<_> = stdout.lines().filter(|l| l.starts_with('{')).collect();
    assert_eq!(json_lines.len(), 2, "one dump per node: {stdout}");
    for line in json_lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("fib").is_some());
    }
}

#[test]
fn topology_file_run() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("topo.toml");
    std::fs::write(
        &topo,
        r#"
[[node]]
name = "S"
role = "seeder"

[[node]]
name = "C"
role = "leecher"
start_ms = 1000

[[link]]
a = "S"
b = "C"
rate = 1000000
delay_ms = 10.0
"#,
    )
    .unwrap();
    let out = run(&["--scenario", "from-file", "--topology-file", topo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // missing file path is a config error
    let out = run(&["--scenario", "from-file"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn determinism_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = dir.path().join("a.csv");
    let t2 = dir.path().join("b.csv");
    for t in [&t1, &t2] {
        let out = run(&[
            "--scenario",
            "router-node-degree-4",
            "--seed",
            "42",
            "--trace-out",
            t.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
}
