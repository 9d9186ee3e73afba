//! Command-line front door: `plan-reserve`, `simulate`, `compare`,
//! `analyze`. Every artifact embeds its run manifest; all randomness (none
//! today beyond what callers derive from it) flows from `--seed`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::catalog::Catalog;
use crate::demand::{DemandDistribution, DemandTrace, Reducer, Window};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::reservation::plan_reservation;
use crate::simulator::{
    compare_policies, plan_for_policy, run_simulation, write_comparison_csv,
    write_comparison_table, Policy, SimParams,
};

#[derive(Parser)]
#[command(
    name = "cloudplan",
    version,
    about = "Plan and simulate IaaS reserved/on-demand VM subscriptions"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a cost-minimal long-term reservation plan from a demand trace.
    PlanReserve(PlanReserveArgs),
    /// Replay a trace through the short-term planner under one policy.
    Simulate(SimulateArgs),
    /// Run several policies on the same inputs and tabulate their costs.
    Compare(CompareArgs),
    /// Print trace statistics and the empirical demand distribution.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Catalog JSON file.
    #[arg(long)]
    catalog: PathBuf,
    /// Demand trace CSV (`interval_index,demand`).
    #[arg(long)]
    trace: PathBuf,
    /// Length of one short-term interval in seconds.
    #[arg(long, default_value_t = 300)]
    interval_seconds: u32,
    /// Seed recorded in the run manifest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for output artifacts (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanReserveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Aggregate the trace before building the demand distribution.
    #[arg(long)]
    window: Option<Window>,
    /// Reducer used with --window.
    #[arg(long, default_value = "p95")]
    reducer: Reducer,
}

#[derive(Args, Clone)]
struct SimTuningArgs {
    /// Intervals between requesting a VM and its capacity taking effect.
    #[arg(long, default_value_t = 1)]
    launch_latency: u32,
    /// Minimum running intervals before a VM may shut down
    /// (default: one billing quantum).
    #[arg(long)]
    min_rental: Option<u32>,
    /// Kalman process-noise variance (default: 0.05 * var of first 20 samples).
    #[arg(long)]
    kf_q: Option<f64>,
    /// Kalman measurement-noise variance (default: var of first 20 samples).
    #[arg(long)]
    kf_r: Option<f64>,
    /// Multiplier on the predicted level before taking the ceiling.
    #[arg(long, default_value_t = 1.0)]
    headroom: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Provisioning policy.
    #[arg(long)]
    policy: Policy,
    #[command(flatten)]
    tuning: SimTuningArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated policies to compare.
    #[arg(long, value_delimiter = ',', required = true)]
    policies: Vec<Policy>,
    #[command(flatten)]
    tuning: SimTuningArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Demand trace CSV (`interval_index,demand`).
    #[arg(long)]
    trace: PathBuf,
    /// Length of one short-term interval in seconds.
    #[arg(long, default_value_t = 300)]
    interval_seconds: u32,
    /// Seed recorded in the run manifest.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for output artifacts (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse arguments, run, and translate errors into exit codes
/// (1 = i/o, 2 = invalid input). Clap's own usage errors also exit 2.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PlanReserve(args) => cmd_plan_reserve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

fn sim_params(common: &CommonArgs, tuning: &SimTuningArgs) -> SimParams {
    SimParams {
        launch_latency: tuning.launch_latency,
        min_rental: tuning.min_rental,
        kf_q: tuning.kf_q,
        kf_r: tuning.kf_r,
        headroom: tuning.headroom,
        seed: common.seed,
    }
}

fn load_inputs(common: &CommonArgs) -> Result<(Catalog, DemandTrace)> {
    let catalog = Catalog::load(&common.catalog)?;
    for warning in catalog.warnings() {
        eprintln!("warning: {warning}");
    }
    let trace = DemandTrace::load(&common.trace, common.interval_seconds)?;
    Ok((catalog, trace))
}

fn base_manifest(command: &str, common: &CommonArgs) -> Result<RunManifest> {
    let mut manifest = RunManifest::new(command, common.seed);
    manifest.add_input("catalog", &common.catalog)?;
    manifest.add_input("trace", &common.trace)?;
    manifest.set("interval_seconds", common.interval_seconds);
    Ok(manifest)
}

fn tuning_into_manifest(manifest: &mut RunManifest, tuning: &SimTuningArgs) {
    manifest.set("launch_latency", tuning.launch_latency);
    manifest.set("min_rental", tuning.min_rental);
    manifest.set("kf_q", tuning.kf_q);
    manifest.set("kf_r", tuning.kf_r);
    manifest.set("headroom", tuning.headroom);
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_pretty_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

#[derive(Serialize)]
struct PlanOutput<'a> {
    manifest: &'a RunManifest,
    best_cp_type: String,
    r_star: u64,
    window: [u64; 2],
    quantities: &'a std::collections::BTreeMap<crate::catalog::VmTypeId, u64>,
    reserved_capacity: u64,
    expected_cost_per_interval: f64,
}

fn cmd_plan_reserve(args: PlanReserveArgs) -> Result<()> {
    let (catalog, trace) = load_inputs(&args.common)?;
    let trace = match args.window {
        Some(window) => trace.aggregate(window, args.reducer)?,
        None => trace,
    };
    let prices = catalog.normalize()?;
    let dist = DemandDistribution::from_trace(&trace);
    let search = plan_reservation(&dist, &catalog, &prices)?;

    let mut manifest = base_manifest("plan-reserve", &args.common)?;
    manifest.set(
        "window",
        args.window.map(|w| w.to_string()).unwrap_or_default(),
    );
    manifest.set("reducer", format!("{:?}", args.reducer).to_lowercase());

    let output = PlanOutput {
        manifest: &manifest,
        best_cp_type: search.best_cp.to_string(),
        r_star: search.r_star,
        window: [search.window.0, search.window.1],
        quantities: &search.plan.quantities,
        reserved_capacity: search.plan.reserved_capacity,
        expected_cost_per_interval: search.plan.expected_cost_per_interval,
    };
    let value = serde_json::to_value(&output).expect("plan serialization cannot fail");
    let bytes = to_pretty_bytes(&value);
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| Error::io("stdout", e))?;
    if let Some(out) = &args.common.out {
        ensure_out_dir(out)?;
        write_file(&out.join("plan.json"), &bytes)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (catalog, trace) = load_inputs(&args.common)?;
    let params = sim_params(&args.common, &args.tuning);
    let plan = plan_for_policy(args.policy, &catalog, &trace)?;
    let report = run_simulation(&catalog, &trace, args.policy, &plan, &params)?;

    let mut manifest = base_manifest("simulate", &args.common)?;
    manifest.set("policy", args.policy.name());
    tuning_into_manifest(&mut manifest, &args.tuning);

    let json = to_pretty_bytes(&report.to_json_value(Some(&manifest)));
    match &args.common.out {
        Some(out) => {
            ensure_out_dir(out)?;
            write_file(&out.join("report.json"), &json)?;
            let mut csv = Vec::new();
            report
                .write_interval_csv(&mut csv)
                .expect("writing to memory cannot fail");
            write_file(&out.join("intervals.csv"), &csv)?;
            let mut jsonl = Vec::new();
            report
                .write_decisions_jsonl(&catalog, &mut jsonl)
                .expect("writing to memory cannot fail");
            write_file(&out.join("decisions.jsonl"), &jsonl)?;
            eprintln!(
                "wrote {}, intervals.csv, decisions.jsonl",
                out.join("report.json").display()
            );
        }
        None => {
            std::io::stdout()
                .write_all(&json)
                .map_err(|e| Error::io("stdout", e))?;
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    if args.policies.is_empty() {
        return Err(Error::Validation("no policies given".to_string()));
    }
    let (catalog, trace) = load_inputs(&args.common)?;
    let params = sim_params(&args.common, &args.tuning);
    let reports = compare_policies(&catalog, &trace, &args.policies, &params)?;

    let mut manifest = base_manifest("compare", &args.common)?;
    manifest.set(
        "policies",
        reports.iter().map(|r| r.policy.name()).collect::<Vec<_>>(),
    );
    tuning_into_manifest(&mut manifest, &args.tuning);

    let mut table = Vec::new();
    write_comparison_table(&reports, &mut table).expect("writing to memory cannot fail");
    std::io::stdout()
        .write_all(&table)
        .map_err(|e| Error::io("stdout", e))?;

    if let Some(out) = &args.common.out {
        ensure_out_dir(out)?;
        let mut csv = Vec::new();
        write_comparison_csv(&reports, &mut csv).expect("writing to memory cannot fail");
        write_file(&out.join("compare.csv"), &csv)?;
        for report in &reports {
            let json = to_pretty_bytes(&report.to_json_value(Some(&manifest)));
            write_file(
                &out.join(format!("report_{}.json", report.policy.name())),
                &json,
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    manifest: &'a RunManifest,
    samples: usize,
    interval_seconds: u32,
    min: u64,
    max: u64,
    mean: f64,
    p50: u64,
    p95: u64,
    p99: u64,
    distribution: &'a DemandDistribution,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let trace = DemandTrace::load(&args.trace, args.interval_seconds)?;
    let dist = DemandDistribution::from_trace(&trace);

    let mut sorted = trace.samples().to_vec();
    sorted.sort_unstable();
    let percentile = |p: usize| -> u64 {
        let rank = (p * sorted.len()).div_ceil(100);
        sorted[rank.max(1) - 1]
    };

    let mut manifest = RunManifest::new("analyze", args.seed);
    manifest.add_input("trace", &args.trace)?;
    manifest.set("interval_seconds", args.interval_seconds);

    let output = AnalyzeOutput {
        manifest: &manifest,
        samples: trace.len(),
        interval_seconds: args.interval_seconds,
        min: *sorted.first().expect("trace is nonempty"),
        max: *sorted.last().expect("trace is nonempty"),
        mean: trace.samples().iter().sum::<u64>() as f64 / trace.len() as f64,
        p50: percentile(50),
        p95: percentile(95),
        p99: percentile(99),
        distribution: &dist,
    };
    let bytes = to_pretty_bytes(&serde_json::to_value(&output).expect("serialization"));
    std::io::stdout()
        .write_all(&bytes)
        .map_err(|e| Error::io("stdout", e))?;
    if let Some(out) = &args.out {
        ensure_out_dir(out)?;
        write_file(&out.join("analysis.json"), &bytes)?;
    }
    Ok(())
}
