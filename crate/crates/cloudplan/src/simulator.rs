//! Discrete-time replay of a demand trace through the predictor and the
//! short-term planner, with full cost accounting and baseline policies.
//!
//! Per interval: in-flight launches land, demand is served (shortfall is
//! recorded as unserved demand, not patched mid-interval), costs are billed,
//! the next interval's capacity is predicted, and the planner reconfigures
//! the pool. Decisions made during interval `t` take effect at
//! `t + launch_latency`.

use std::collections::BTreeMap;
use std::io::Write;

use clap::ValueEnum;
use serde::Serialize;

use crate::catalog::Catalog;
use crate::demand::{DemandDistribution, DemandTrace};
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::predictor::{default_noise_params, KalmanState};
use crate::reservation::{covering_counts, expected_plan_cost, plan_reservation, ReservationPlan};
use crate::spa::{spa_step, Scenario, SpaDecision, SpaParams, Tier, VmPool, VmStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Phase-1 reservation plus Kalman-predicted short-term planning.
    TwoPhase,
    /// Phase-1 reservation, next interval provisioned for the demand just
    /// measured.
    Reactive,
    /// No reservation; everything on-demand (perfect prediction).
    AllOnDemand,
    /// Reservation covering the trace maximum (perfect prediction).
    FullReservation,
    /// Phase-1 reservation with exact next-interval prediction; lower-bounds
    /// achievable cost.
    Oracle,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::TwoPhase => "two_phase",
            Policy::Reactive => "reactive",
            Policy::AllOnDemand => "all_on_demand",
            Policy::FullReservation => "full_reservation",
            Policy::Oracle => "oracle",
        }
    }

    pub fn all() -> [Policy; 5] {
        [
            Policy::TwoPhase,
            Policy::Reactive,
            Policy::AllOnDemand,
            Policy::FullReservation,
            Policy::Oracle,
        ]
    }

    /// Whether the policy provisions against the phase-1 reservation plan.
    fn uses_phase1_plan(&self) -> bool {
        matches!(self, Policy::TwoPhase | Policy::Reactive | Policy::Oracle)
    }

    /// Whether r_p is the exact next-interval demand. The pure reservation
    /// baselines isolate the contract axis, so they get perfect prediction.
    fn has_perfect_prediction(&self) -> bool {
        matches!(
            self,
            Policy::Oracle | Policy::AllOnDemand | Policy::FullReservation
        )
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub launch_latency: u32,
    /// Defaults to the catalog billing quantum.
    pub min_rental: Option<u32>,
    pub kf_q: Option<f64>,
    pub kf_r: Option<f64>,
    pub headroom: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            launch_latency: 1,
            min_rental: None,
            kf_q: None,
            kf_r: None,
            headroom: 1.0,
            seed: 0,
        }
    }
}

/// Exact cost accumulators in micro-units. The total is the sum of the three
/// components by construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct CostLedger {
    pub upfront_micro: i64,
    pub usage_micro: i64,
    pub on_demand_micro: i64,
    pub unserved_demand: u64,
}

impl CostLedger {
    pub fn total_micro(&self) -> i64 {
        self.upfront_micro + self.usage_micro + self.on_demand_micro
    }
}

#[derive(Debug, Clone)]
pub struct IntervalRow {
    pub interval: u64,
    pub r_m: u64,
    pub r_p: u64,
    pub r_c: u64,
    pub r_r: u64,
    pub scenario: Scenario,
    pub upfront_micro: i64,
    pub usage_micro: i64,
    pub on_demand_micro: i64,
    pub unserved: u64,
    pub running_reserved: u64,
    pub running_on_demand: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TierStats {
    pub tier: &'static str,
    pub mean_running: f64,
    pub p95_running: u64,
    pub max_running: u64,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub policy: Policy,
    pub intervals: u64,
    pub ledger: CostLedger,
    pub plan: ReservationPlan,
    pub rows: Vec<IntervalRow>,
    pub decisions: Vec<(u64, SpaDecision)>,
    pub vm_stats: Vec<TierStats>,
}

#[derive(Serialize)]
struct TotalsUnits {
    upfront: f64,
    usage: f64,
    on_demand: f64,
    total: f64,
}

#[derive(Serialize)]
struct TotalsMicro {
    upfront: i64,
    usage: i64,
    on_demand: i64,
    total: i64,
}

#[derive(Serialize)]
struct PlanJson<'a> {
    quantities: &'a BTreeMap<crate::catalog::VmTypeId, u64>,
    reserved_capacity: u64,
    expected_cost_per_interval: f64,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<&'a RunManifest>,
    policy: &'a str,
    intervals: u64,
    totals: TotalsUnits,
    totals_micro: TotalsMicro,
    unserved: u64,
    plan: PlanJson<'a>,
    vm_utilization: &'a [TierStats],
}

#[derive(Serialize)]
struct DecisionJson<'a> {
    interval: u64,
    scenario: &'a str,
    r_m: u64,
    r_p: u64,
    r_c: u64,
    r_r: u64,
    launches: LaunchesJson,
    shutdowns: &'a [u64],
    capacity_after: u64,
}

#[derive(Serialize)]
struct LaunchesJson {
    reserved: BTreeMap<String, u64>,
    on_demand: BTreeMap<String, u64>,
}

impl SimulationReport {
    pub fn to_json_value(&self, manifest: Option<&RunManifest>) -> serde_json::Value {
        let micro = 1e6;
        let report = ReportJson {
            manifest,
            policy: self.policy.name(),
            intervals: self.intervals,
            totals: TotalsUnits {
                upfront: self.ledger.upfront_micro as f64 / micro,
                usage: self.ledger.usage_micro as f64 / micro,
                on_demand: self.ledger.on_demand_micro as f64 / micro,
                total: self.ledger.total_micro() as f64 / micro,
            },
            totals_micro: TotalsMicro {
                upfront: self.ledger.upfront_micro,
                usage: self.ledger.usage_micro,
                on_demand: self.ledger.on_demand_micro,
                total: self.ledger.total_micro(),
            },
            unserved: self.ledger.unserved_demand,
            plan: PlanJson {
                quantities: &self.plan.quantities,
                reserved_capacity: self.plan.reserved_capacity,
                expected_cost_per_interval: self.plan.expected_cost_per_interval,
            },
            vm_utilization: &self.vm_stats,
        };
        serde_json::to_value(report).expect("report serialization cannot fail")
    }

    /// Per-interval CSV for plotting:
    /// `interval,r_m,r_p,r_c,r_r,scenario,cost_upfront,cost_usage,cost_od,unserved`.
    pub fn write_interval_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "interval,r_m,r_p,r_c,r_r,scenario,cost_upfront,cost_usage,cost_od,unserved"
        )?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                row.interval,
                row.r_m,
                row.r_p,
                row.r_c,
                row.r_r,
                row.scenario,
                row.upfront_micro as f64 / 1e6,
                row.usage_micro as f64 / 1e6,
                row.on_demand_micro as f64 / 1e6,
                row.unserved,
            )?;
        }
        Ok(())
    }

    /// One JSON object per planning decision.
    pub fn write_decisions_jsonl<W: Write>(
        &self,
        catalog: &Catalog,
        mut w: W,
    ) -> std::io::Result<()> {
        for (interval, d) in &self.decisions {
            let nonzero = |counts: &[u64]| -> BTreeMap<String, u64> {
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n > 0)
                    .map(|(i, &n)| (catalog.types()[i].id.as_str().to_string(), n))
                    .collect()
            };
            let line = DecisionJson {
                interval: *interval,
                scenario: d.scenario.as_str(),
                r_m: d.r_m,
                r_p: d.r_p,
                r_c: d.r_c,
                r_r: d.r_r,
                launches: LaunchesJson {
                    reserved: nonzero(&d.reserved_launches),
                    on_demand: nonzero(&d.on_demand_launches),
                },
                shutdowns: &d.shutdowns,
                capacity_after: d.resulting_capacity,
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// The reservation plan a policy runs against.
pub fn plan_for_policy(
    policy: Policy,
    catalog: &Catalog,
    trace: &DemandTrace,
) -> Result<ReservationPlan> {
    let prices = catalog.normalize()?;
    match policy {
        _ if policy.uses_phase1_plan() => {
            let dist = DemandDistribution::from_trace(trace);
            Ok(plan_reservation(&dist, catalog, &prices)?.plan)
        }
        Policy::AllOnDemand => {
            let dist = DemandDistribution::from_trace(trace);
            let zeros = vec![0; catalog.len()];
            let cost = expected_plan_cost(&zeros, catalog, &prices, &dist);
            Ok(ReservationPlan::empty(catalog, cost))
        }
        Policy::FullReservation => {
            let dist = DemandDistribution::from_trace(trace);
            let counts = covering_counts(catalog, trace.max_demand())?;
            let cost = expected_plan_cost(&counts, catalog, &prices, &dist);
            let reserved_capacity = counts
                .iter()
                .zip(catalog.types())
                .map(|(n, t)| n * t.capacity)
                .sum();
            Ok(ReservationPlan {
                lease_period: catalog.lease_period,
                quantities: catalog
                    .types()
                    .iter()
                    .zip(&counts)
                    .map(|(t, &n)| (t.id.clone(), n))
                    .collect(),
                reserved_capacity,
                expected_cost_per_interval: cost,
            })
        }
        _ => unreachable!("all policies handled"),
    }
}

/// Bill one interval: amortized upfront for the whole contract (launched or
/// not), usage per running reserved instance, and a full quantum price for
/// every running on-demand instance entering a new quantum. Ticks the
/// per-instance rental and quantum counters.
pub fn account_interval(
    pool: &mut VmPool,
    catalog: &Catalog,
    ledger: &mut CostLedger,
) -> (i64, i64, i64) {
    let lease = catalog.lease_period as i64;
    let quantum = catalog.billing_quantum;

    let mut upfront = 0i64;
    for (i, &n) in pool.contract().iter().enumerate() {
        let total = catalog.types()[i].upfront_total.micro();
        let amortized = (total + lease / 2) / lease;
        upfront += amortized * n as i64;
    }

    let usage_prices: Vec<i64> = catalog
        .types()
        .iter()
        .map(|t| t.reserved_usage_per_interval.micro())
        .collect();
    let od_prices: Vec<i64> = catalog
        .types()
        .iter()
        .map(|t| t.on_demand_per_quantum.micro())
        .collect();

    let mut usage = 0i64;
    let mut on_demand = 0i64;
    for inst in pool.instances_mut() {
        if inst.status != VmStatus::Running {
            continue;
        }
        match inst.tier {
            Tier::Reserved => usage += usage_prices[inst.type_index],
            Tier::OnDemand => {
                if inst.intervals_in_quantum == 0 {
                    on_demand += od_prices[inst.type_index];
                }
            }
        }
        inst.intervals_running += 1;
        inst.intervals_in_quantum = (inst.intervals_in_quantum + 1) % quantum;
    }

    ledger.upfront_micro += upfront;
    ledger.usage_micro += usage;
    ledger.on_demand_micro += on_demand;
    (upfront, usage, on_demand)
}

/// Replay the trace under one policy.
pub fn run_simulation(
    catalog: &Catalog,
    trace: &DemandTrace,
    policy: Policy,
    plan: &ReservationPlan,
    params: &SimParams,
) -> Result<SimulationReport> {
    let samples = trace.samples();
    let spa_params = SpaParams {
        billing_quantum: catalog.billing_quantum,
        min_rental: params.min_rental.unwrap_or(catalog.billing_quantum),
        launch_latency: params.launch_latency,
    };

    let mut predictor = if policy == Policy::TwoPhase {
        let (dq, dr) = default_noise_params(samples);
        Some(KalmanState::new(
            params.kf_q.unwrap_or(dq),
            params.kf_r.unwrap_or(dr),
        )?)
    } else {
        None
    };

    let mut pool = VmPool::new(catalog, plan)?;
    let mut ledger = CostLedger::default();
    let mut rows = Vec::with_capacity(samples.len());
    let mut decisions = Vec::with_capacity(samples.len());

    // Initial provisioning: assumed in place when the trace starts. Policies
    // with perfect prediction size it for the first interval; the others
    // start cold.
    let initial_rp = if policy.has_perfect_prediction() {
        samples[0]
    } else {
        0
    };
    let bootstrap = spa_step(&pool, 0, initial_rp, catalog, &spa_params)?;
    pool.apply(&bootstrap, 0, 0);

    let last = samples.len() - 1;
    for (t, &r_m) in samples.iter().enumerate() {
        let t = t as u64;
        pool.advance(t);

        let r_c = pool.running_capacity();
        let r_r = pool.reserved_capacity();
        let unserved = r_m.saturating_sub(r_c);
        ledger.unserved_demand += unserved;

        let running_reserved = pool
            .instances()
            .iter()
            .filter(|i| i.status == VmStatus::Running && i.tier == Tier::Reserved)
            .count() as u64;
        let running_on_demand = pool
            .instances()
            .iter()
            .filter(|i| i.status == VmStatus::Running && i.tier == Tier::OnDemand)
            .count() as u64;

        let (upfront, usage, on_demand) = account_interval(&mut pool, catalog, &mut ledger);

        let r_p = match policy {
            Policy::TwoPhase => {
                let kf = predictor.as_mut().expect("two_phase has a predictor");
                kf.step(r_m as f64);
                kf.predict_capacity(params.headroom)?
            }
            Policy::Reactive => r_m,
            Policy::Oracle | Policy::AllOnDemand | Policy::FullReservation => {
                samples[(t as usize + 1).min(last)]
            }
        };

        let decision = spa_step(&pool, r_m, r_p, catalog, &spa_params)?;
        pool.apply(&decision, t, spa_params.launch_latency);

        rows.push(IntervalRow {
            interval: t,
            r_m,
            r_p,
            r_c,
            r_r,
            scenario: decision.scenario,
            upfront_micro: upfront,
            usage_micro: usage,
            on_demand_micro: on_demand,
            unserved,
            running_reserved,
            running_on_demand,
        });
        decisions.push((t, decision));
    }

    let vm_stats = vec![
        tier_stats("reserved", rows.iter().map(|r| r.running_reserved)),
        tier_stats("on_demand", rows.iter().map(|r| r.running_on_demand)),
    ];

    Ok(SimulationReport {
        policy,
        intervals: samples.len() as u64,
        ledger,
        plan: plan.clone(),
        rows,
        decisions,
        vm_stats,
    })
}

fn tier_stats(tier: &'static str, counts: impl Iterator<Item = u64>) -> TierStats {
    let mut values: Vec<u64> = counts.collect();
    if values.is_empty() {
        return TierStats {
            tier,
            mean_running: 0.0,
            p95_running: 0,
            max_running: 0,
        };
    }
    let sum: u64 = values.iter().sum();
    let mean = sum as f64 / values.len() as f64;
    values.sort_unstable();
    let rank = (19 * values.len()).div_ceil(20); // ceil(0.95 n), nearest rank
    TierStats {
        tier,
        mean_running: mean,
        p95_running: values[rank - 1],
        max_running: *values.last().unwrap(),
    }
}

/// Run several policies on identical inputs. Reports come back sorted by
/// policy name; duplicates collapse.
pub fn compare_policies(
    catalog: &Catalog,
    trace: &DemandTrace,
    policies: &[Policy],
    params: &SimParams,
) -> Result<Vec<SimulationReport>> {
    let mut sorted: Vec<Policy> = policies.to_vec();
    sorted.sort_by_key(|p| p.name());
    sorted.dedup();

    let phase1 = if sorted.iter().any(|p| p.uses_phase1_plan()) {
        Some(plan_for_policy(Policy::TwoPhase, catalog, trace)?)
    } else {
        None
    };

    let mut reports = Vec::with_capacity(sorted.len());
    for policy in sorted {
        let plan = if policy.uses_phase1_plan() {
            phase1.clone().expect("phase-1 plan computed above")
        } else {
            plan_for_policy(policy, catalog, trace)?
        };
        reports.push(run_simulation(catalog, trace, policy, &plan, params)?);
    }
    Ok(reports)
}

/// Comparison CSV, one row per policy.
pub fn write_comparison_csv<W: Write>(
    reports: &[SimulationReport],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "policy,total,upfront,usage,on_demand,unserved,\
         mean_reserved,p95_reserved,mean_on_demand,p95_on_demand"
    )?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.policy.name(),
            r.ledger.total_micro() as f64 / 1e6,
            r.ledger.upfront_micro as f64 / 1e6,
            r.ledger.usage_micro as f64 / 1e6,
            r.ledger.on_demand_micro as f64 / 1e6,
            r.ledger.unserved_demand,
            r.vm_stats[0].mean_running,
            r.vm_stats[0].p95_running,
            r.vm_stats[1].mean_running,
            r.vm_stats[1].p95_running,
        )?;
    }
    Ok(())
}

/// Human-readable comparison table.
pub fn write_comparison_table<W: Write>(
    reports: &[SimulationReport],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<18} {:>14} {:>12} {:>12} {:>12} {:>10} {:>12} {:>12}",
        "policy",
        "total",
        "upfront",
        "usage",
        "on_demand",
        "unserved",
        "mean res VMs",
        "mean od VMs"
    )?;
    writeln!(w, "{}", "-".repeat(108))?;
    for r in reports {
        writeln!(
            w,
            "{:<18} {:>14.4} {:>12.4} {:>12.4} {:>12.4} {:>10} {:>12.2} {:>12.2}",
            r.policy.name(),
            r.ledger.total_micro() as f64 / 1e6,
            r.ledger.upfront_micro as f64 / 1e6,
            r.ledger.usage_micro as f64 / 1e6,
            r.ledger.on_demand_micro as f64 / 1e6,
            r.ledger.unserved_demand,
            r.vm_stats[0].mean_running,
            r.vm_stats[1].mean_running,
        )?;
    }
    Ok(())
}
