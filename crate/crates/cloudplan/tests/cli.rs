//! End-to-end tests of the command-line interface: exit codes, artifact
//! layout, and output schemas.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cloudplan"))
}

struct Fixture {
    _dir: tempfile::TempDir,
    catalog: PathBuf,
    trace: PathBuf,
    root: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let catalog = dir.path().join("catalog.json");
    std::fs::write(
        &catalog,
        r#"{
  "billing_quantum_intervals": 12,
  "lease_period_intervals": 8760,
  "vm_types": [
    {"id": "small", "capacity": 2, "upfront_total": 70.0,
     "reserved_usage_per_interval": 0.004, "on_demand_per_quantum": 0.25},
    {"id": "large", "capacity": 8, "upfront_total": 240.0,
     "reserved_usage_per_interval": 0.013, "on_demand_per_quantum": 0.85}
  ]
}"#,
    )
    .unwrap();
    let trace = dir.path().join("trace.csv");
    let mut rows = String::from("interval_index,demand\n");
    for t in 0..600u64 {
        // Two daily-ish plateaus plus a weekly spike.
        let base = if (t / 12) % 2 == 0 { 10 } else { 16 };
        let spike = if t % 84 == 0 { 9 } else { 0 };
        rows.push_str(&format!("{t},{}\n", base + spike));
    }
    std::fs::write(&trace, rows).unwrap();
    Fixture {
        root: dir.path().to_path_buf(),
        _dir: dir,
        catalog,
        trace,
    }
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn plan_reserve_emits_plan_json() {
    let f = fixture();
    let out = run(&[
        "plan-reserve",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
    ]);
    let plan = stdout_json(&out);
    assert!(plan["quantities"].is_object());
    assert!(plan["reserved_capacity"].as_u64().is_some());
    assert!(plan["expected_cost_per_interval"].as_f64().is_some());
    assert!(plan["r_star"].as_u64().is_some());
    assert_eq!(plan["window"].as_array().unwrap().len(), 2);
    assert_eq!(plan["manifest"]["command"], "plan-reserve");
    assert_eq!(plan["manifest"]["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn plan_reserve_supports_window_aggregation() {
    let f = fixture();
    let out = run(&[
        "plan-reserve",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
        "--interval-seconds",
        "300",
        "--window",
        "daily",
        "--reducer",
        "p95",
    ]);
    let plan = stdout_json(&out);
    assert_eq!(plan["manifest"]["config"]["window"], "daily");
    assert_eq!(plan["manifest"]["config"]["reducer"], "p95");
}

#[test]
fn missing_catalog_exits_1() {
    let f = fixture();
    let out = run(&[
        "plan-reserve",
        "--catalog",
        f.root.join("nope.json").to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_catalog_exits_2() {
    let f = fixture();
    let bad = f.root.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"billing_quantum_intervals": 1, "lease_period_intervals": 24,
            "vm_types": [{"id": "x", "capacity": 0, "upfront_total": 1.0,
            "reserved_usage_per_interval": 0.1, "on_demand_per_quantum": 0.5}]}"#,
    )
    .unwrap();
    let out = run(&[
        "plan-reserve",
        "--catalog",
        bad.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("capacity"), "stderr: {stderr}");
}

#[test]
fn simulate_writes_artifacts() {
    let f = fixture();
    let out_dir = f.root.join("sim_out");
    let out = run(&[
        "simulate",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
        "--policy",
        "two_phase",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["policy"], "two_phase");
    assert_eq!(report["intervals"], 600);
    assert_eq!(report["manifest"]["config"]["policy"], "two_phase");
    let totals = &report["totals_micro"];
    assert_eq!(
        totals["total"].as_i64().unwrap(),
        totals["upfront"].as_i64().unwrap()
            + totals["usage"].as_i64().unwrap()
            + totals["on_demand"].as_i64().unwrap()
    );

    let csv = std::fs::read_to_string(out_dir.join("intervals.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "interval,r_m,r_p,r_c,r_r,scenario,cost_upfront,cost_usage,cost_od,unserved"
    );
    assert_eq!(lines.count(), 600);

    let jsonl = std::fs::read_to_string(out_dir.join("decisions.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 600);
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    for key in [
        "interval",
        "scenario",
        "r_m",
        "r_p",
        "r_c",
        "r_r",
        "launches",
        "shutdowns",
        "capacity_after",
    ] {
        assert!(first.get(key).is_some(), "decision log missing {key}");
    }
}

#[test]
fn simulate_without_out_prints_report() {
    let f = fixture();
    let out = run(&[
        "simulate",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
        "--policy",
        "oracle",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["policy"], "oracle");
    assert_eq!(report["unserved"], 0);
}

#[test]
fn unknown_policy_exits_2_and_lists_valid_set() {
    let f = fixture();
    let out = run(&[
        "simulate",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
        "--policy",
        "spotty",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for name in [
        "two_phase",
        "reactive",
        "all_on_demand",
        "full_reservation",
        "oracle",
    ] {
        assert!(stderr.contains(name), "missing {name} in: {stderr}");
    }
}

#[test]
fn compare_writes_csv_rows_sorted_by_policy() {
    let f = fixture();
    let out_dir = f.root.join("cmp_out");
    let out = run(&[
        "compare",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
        "--policies",
        "two_phase,oracle",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("policy"), "table header missing: {stdout}");

    let csv = std::fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3); // header + 2 policies
    assert!(lines[1].starts_with("oracle,"));
    assert!(lines[2].starts_with("two_phase,"));

    // Oracle row reports zero unserved demand on the latency-1 setup.
    let oracle_unserved: u64 = lines[1].split(',').nth(5).unwrap().parse().unwrap();
    assert_eq!(oracle_unserved, 0);

    assert!(out_dir.join("report_oracle.json").exists());
    assert!(out_dir.join("report_two_phase.json").exists());
}

#[test]
fn compare_rejects_empty_policy_list() {
    let f = fixture();
    let out = run(&[
        "compare",
        "--catalog",
        f.catalog.to_str().unwrap(),
        "--trace",
        f.trace.to_str().unwrap(),
        "--policies",
        "",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_reports_stats_and_distribution() {
    let f = fixture();
    let out = run(&[
        "analyze",
        "--trace",
        f.trace.to_str().unwrap(),
        "--interval-seconds",
        "300",
    ]);
    let stats = stdout_json(&out);
    assert_eq!(stats["samples"], 600);
    assert_eq!(stats["min"], 10);
    assert_eq!(stats["max"], 25);
    assert!(stats["mean"].as_f64().unwrap() > 10.0);
    assert!(stats["distribution"]["support"].is_array());
    assert_eq!(stats["manifest"]["command"], "analyze");
}

#[test]
fn negative_demand_in_trace_exits_2() {
    let f = fixture();
    let bad = f.root.join("bad_trace.csv");
    std::fs::write(&bad, "0,5\n1,-3\n").unwrap();
    let out = run(&["analyze", "--trace", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("negative"));
}

#[test]
fn same_seed_twice_is_byte_identical() {
    let f = fixture();
    let run_once = |tag: &str| {
        let out_dir = f.root.join(tag);
        let out = run(&[
            "simulate",
            "--catalog",
            f.catalog.to_str().unwrap(),
            "--trace",
            f.trace.to_str().unwrap(),
            "--policy",
            "reactive",
            "--seed",
            "42",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(out_dir.join("report.json")).unwrap()
    };
    assert_eq!(run_once("a"), run_once("b"));
}
