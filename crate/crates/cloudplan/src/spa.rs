//! Short-term planning: per-interval scenario classification over a stateful
//! VM pool.
//!
//! Every interval the planner compares the predicted capacity demand `r_p`
//! against the total reserved capacity `r_r` and the currently running
//! capacity `r_c`, in that order:
//!
//! 1. `r_r < r_p`: the forecast exceeds all reserved capacity, so launch
//!    every reserved instance and subscribe on-demand instances for the gap
//!    (`ilp1_on_demand`). The on-demand fleet is reconciled to the exact
//!    ILP target, shutting surplus instances once their minimum rental has
//!    elapsed.
//! 2. `r_c < r_p <= r_r`: the forecast fits the contract but not the
//!    running set, so launch more reserved instances
//!    (`ilp2_adjust_configuration`).
//! 3. `r_c > r_p`: shut down running instances closest to their
//!    billing-quantum boundary (`shutdown_spare_vms`).
//!
//! Equal `r_c` and `r_p` is a no-op. Launched instances spend
//! `launch_latency` intervals in `Launching` status contributing no
//! capacity; no instance shuts down before `min_rental` running intervals.

use serde::Serialize;

use crate::catalog::Catalog;
use crate::cover::{min_cost_cover, CoverItem};
use crate::error::{Error, Result};
use crate::reservation::ReservationPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Reserved,
    OnDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VmStatus {
    Launching,
    Running,
}

/// One launched VM. Billing counters tick only while running; stopped
/// instances leave the pool entirely (reserved slots free up for relaunch).
#[derive(Debug, Clone)]
pub struct VmInstance {
    pub id: u64,
    pub type_index: usize,
    pub tier: Tier,
    pub status: VmStatus,
    pub requested_at: u64,
    pub running_from: u64,
    /// Running intervals so far; gates the minimum rental time.
    pub intervals_running: u64,
    /// Running intervals inside the current billing quantum, in
    /// `[0, billing_quantum)`. Zero means the next billed interval opens
    /// (and, for on-demand, pays for) a fresh quantum.
    pub intervals_in_quantum: u32,
}

impl VmInstance {
    /// Intervals left until the current quantum closes; zero right at the
    /// boundary. Instances nearest the boundary are shut down first.
    pub fn intervals_to_quantum_boundary(&self, billing_quantum: u32) -> u32 {
        (billing_quantum - self.intervals_in_quantum) % billing_quantum
    }
}

/// Timing knobs shared by planner and simulator.
#[derive(Debug, Clone, Copy)]
pub struct SpaParams {
    pub billing_quantum: u32,
    pub min_rental: u32,
    pub launch_latency: u32,
}

/// The launched-VM state: the reservation contract plus every instance that
/// is currently launching or running.
#[derive(Debug, Clone)]
pub struct VmPool {
    contract: Vec<u64>,
    capacities: Vec<u64>,
    instances: Vec<VmInstance>,
    next_id: u64,
}

impl VmPool {
    pub fn new(catalog: &Catalog, plan: &ReservationPlan) -> Result<Self> {
        let mut contract = vec![0u64; catalog.len()];
        for (id, &n) in &plan.quantities {
            match catalog.index_of(id) {
                Some(i) => contract[i] = n,
                None => {
                    return Err(Error::Validation(format!(
                        "reservation plan names unknown vm type {id}"
                    )))
                }
            }
        }
        Ok(VmPool {
            contract,
            capacities: catalog.types().iter().map(|t| t.capacity).collect(),
            instances: Vec::new(),
            next_id: 0,
        })
    }

    pub fn empty(catalog: &Catalog) -> Self {
        VmPool {
            contract: vec![0; catalog.len()],
            capacities: catalog.types().iter().map(|t| t.capacity).collect(),
            instances: Vec::new(),
            next_id: 0,
        }
    }

    pub fn contract(&self) -> &[u64] {
        &self.contract
    }

    /// Total capacity of the reservation contract (r_r), launched or not.
    pub fn reserved_capacity(&self) -> u64 {
        self.contract
            .iter()
            .zip(&self.capacities)
            .map(|(n, c)| n * c)
            .sum()
    }

    /// Capacity of running instances only (r_c); launching ones count zero.
    pub fn running_capacity(&self) -> u64 {
        self.instances
            .iter()
            .filter(|i| i.status == VmStatus::Running)
            .map(|i| self.capacities[i.type_index])
            .sum()
    }

    /// Capacity of running plus launching instances: what the pool will
    /// serve once in-flight launches land.
    pub fn planned_capacity(&self) -> u64 {
        self.instances
            .iter()
            .map(|i| self.capacities[i.type_index])
            .sum()
    }

    pub fn instances(&self) -> &[VmInstance] {
        &self.instances
    }

    pub(crate) fn instances_mut(&mut self) -> &mut [VmInstance] {
        &mut self.instances
    }

    /// Launching-or-running instances of a tier, per type.
    pub fn active_count(&self, tier: Tier, type_index: usize) -> u64 {
        self.instances
            .iter()
            .filter(|i| i.tier == tier && i.type_index == type_index)
            .count() as u64
    }

    /// Flip launches whose latency has elapsed to running.
    pub fn advance(&mut self, now: u64) {
        for inst in &mut self.instances {
            if inst.status == VmStatus::Launching && now >= inst.running_from {
                inst.status = VmStatus::Running;
            }
        }
    }

    fn launch(&mut self, type_index: usize, tier: Tier, now: u64, running_from: u64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.instances.push(VmInstance {
            id,
            type_index,
            tier,
            status: VmStatus::Launching,
            requested_at: now,
            running_from,
            intervals_running: 0,
            intervals_in_quantum: 0,
        });
        id
    }

    fn remove(&mut self, id: u64) {
        if let Some(pos) = self.instances.iter().position(|i| i.id == id) {
            self.instances.remove(pos);
        }
    }

    /// Apply a planning decision: shutdowns first (freeing reserved slots),
    /// then launches, requested during `now` and running `latency` intervals
    /// later.
    pub fn apply(&mut self, decision: &SpaDecision, now: u64, latency: u32) {
        for &id in &decision.shutdowns {
            self.remove(id);
        }
        let running_from = now + latency as u64;
        for (type_index, &n) in decision.reserved_launches.iter().enumerate() {
            for _ in 0..n {
                self.launch(type_index, Tier::Reserved, now, running_from);
            }
        }
        for (type_index, &n) in decision.on_demand_launches.iter().enumerate() {
            for _ in 0..n {
                self.launch(type_index, Tier::OnDemand, now, running_from);
            }
        }
        debug_assert!(self
            .contract
            .iter()
            .enumerate()
            .all(|(i, &n)| self.active_count(Tier::Reserved, i) <= n));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    OnDemand,
    AdjustReserved,
    Shutdown,
    NoOp,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::OnDemand => "on_demand",
            Scenario::AdjustReserved => "adjust_reserved",
            Scenario::Shutdown => "shutdown",
            Scenario::NoOp => "no_op",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one planning step, pure with respect to the pool snapshot.
/// Launch counts are indexed like `catalog.types()`.
#[derive(Debug, Clone)]
pub struct SpaDecision {
    pub scenario: Scenario,
    pub r_m: u64,
    pub r_p: u64,
    /// Running capacity when the decision was taken.
    pub r_c: u64,
    pub r_r: u64,
    pub reserved_launches: Vec<u64>,
    pub on_demand_launches: Vec<u64>,
    pub shutdowns: Vec<u64>,
    /// Planned capacity (running + launching) once the decision is applied.
    pub resulting_capacity: u64,
}

impl SpaDecision {
    pub fn launch_total(&self) -> u64 {
        self.reserved_launches.iter().sum::<u64>() + self.on_demand_launches.iter().sum::<u64>()
    }
}

/// Classify the interval into one of the three scenarios (or a no-op) and
/// compute the launches and shutdowns that bring planned capacity to `r_p`.
/// The measured demand `r_m` is carried through for the decision log; the
/// caller updates the prediction model with it.
pub fn spa_step(
    pool: &VmPool,
    r_m: u64,
    r_p: u64,
    catalog: &Catalog,
    params: &SpaParams,
) -> Result<SpaDecision> {
    let r_r = pool.reserved_capacity();
    let r_c = pool.running_capacity();
    let types = catalog.len();

    let mut decision = SpaDecision {
        scenario: Scenario::NoOp,
        r_m,
        r_p,
        r_c,
        r_r,
        reserved_launches: vec![0; types],
        on_demand_launches: vec![0; types],
        shutdowns: Vec::new(),
        resulting_capacity: pool.planned_capacity(),
    };

    if r_r < r_p {
        decision.scenario = Scenario::OnDemand;
        // Launch whatever part of the contract is not active yet.
        for i in 0..types {
            decision.reserved_launches[i] =
                pool.contract()[i].saturating_sub(pool.active_count(Tier::Reserved, i));
        }
        // Reconcile the on-demand fleet to the ILP target for the gap.
        let target = ilp1_on_demand(r_p - r_r, catalog)?;
        let mut surplus_shutdowns = Vec::new();
        for (i, &wanted) in target.iter().enumerate() {
            let active = pool.active_count(Tier::OnDemand, i);
            if wanted > active {
                decision.on_demand_launches[i] = wanted - active;
            } else if active > wanted {
                let mut candidates: Vec<&VmInstance> = pool
                    .instances()
                    .iter()
                    .filter(|inst| {
                        inst.tier == Tier::OnDemand
                            && inst.type_index == i
                            && inst.status == VmStatus::Running
                            && inst.intervals_running >= params.min_rental as u64
                    })
                    .collect();
                candidates.sort_by_key(|inst| {
                    (
                        inst.intervals_to_quantum_boundary(params.billing_quantum),
                        inst.id,
                    )
                });
                surplus_shutdowns.extend(
                    candidates
                        .iter()
                        .take((active - wanted) as usize)
                        .map(|c| c.id),
                );
            }
        }
        surplus_shutdowns.sort_unstable();
        decision.shutdowns = surplus_shutdowns;
    } else if r_c < r_p {
        decision.scenario = Scenario::AdjustReserved;
        // In-flight launches already count toward the target; only the
        // remaining gap needs new instances.
        if pool.planned_capacity() < r_p {
            decision.reserved_launches = ilp2_adjust_configuration(pool, r_p, catalog)?;
        }
    } else if r_c > r_p {
        decision.scenario = Scenario::Shutdown;
        decision.shutdowns = shutdown_spare_vms(pool, r_p, params);
    }

    let launched_capacity: u64 = (0..types)
        .map(|i| {
            (decision.reserved_launches[i] + decision.on_demand_launches[i])
                * catalog.types()[i].capacity
        })
        .sum();
    let shut_capacity: u64 = decision
        .shutdowns
        .iter()
        .map(|id| {
            let inst = pool
                .instances()
                .iter()
                .find(|i| i.id == *id)
                .expect("shutdown ids come from the pool");
            catalog.types()[inst.type_index].capacity
        })
        .sum();
    decision.resulting_capacity = pool.planned_capacity() + launched_capacity - shut_capacity;
    Ok(decision)
}

/// Cheapest on-demand cover of `deficit` capacity units, priced per billing
/// quantum. Counts are indexed like `catalog.types()`.
pub fn ilp1_on_demand(deficit: u64, catalog: &Catalog) -> Result<Vec<u64>> {
    if catalog.is_empty() {
        return Err(Error::Precondition(
            "cannot subscribe on-demand from an empty catalog".to_string(),
        ));
    }
    if deficit == 0 {
        return Ok(vec![0; catalog.len()]);
    }
    let items: Vec<CoverItem> = catalog
        .types()
        .iter()
        .map(|t| CoverItem {
            capacity: t.capacity,
            cost_micro: t.on_demand_per_quantum.micro(),
            max_count: u64::MAX,
        })
        .collect();
    let (counts, _) =
        min_cost_cover(&items, deficit).expect("unbounded counts make any deficit coverable");
    Ok(counts)
}

/// Pick unlaunched reserved instances to start so that planned capacity
/// reaches `r_p`, minimizing the added usage cost. Requires `r_p <= r_r`
/// (otherwise scenario 1 should have fired) and `r_c < r_p`.
pub fn ilp2_adjust_configuration(pool: &VmPool, r_p: u64, catalog: &Catalog) -> Result<Vec<u64>> {
    let r_r = pool.reserved_capacity();
    if r_p > r_r {
        return Err(Error::Precondition(format!(
            "predicted capacity {r_p} exceeds reserved capacity {r_r}"
        )));
    }
    let r_c = pool.running_capacity();
    if r_c >= r_p {
        return Err(Error::Precondition(format!(
            "running capacity {r_c} already covers predicted capacity {r_p}"
        )));
    }
    let deficit = r_p.saturating_sub(pool.planned_capacity());
    if deficit == 0 {
        return Ok(vec![0; catalog.len()]);
    }
    let items: Vec<CoverItem> = catalog
        .types()
        .iter()
        .enumerate()
        .map(|(i, t)| CoverItem {
            capacity: t.capacity,
            cost_micro: t.reserved_usage_per_interval.micro(),
            max_count: pool.contract()[i].saturating_sub(pool.active_count(Tier::Reserved, i)),
        })
        .collect();
    min_cost_cover(&items, deficit)
        .map(|(counts, _)| counts)
        .ok_or_else(|| {
            Error::Precondition(format!(
                "unlaunched reserved instances cannot cover a deficit of {deficit}"
            ))
        })
}

/// Running instances to stop when capacity exceeds the forecast. Candidates
/// must be past their minimum rental; they are taken nearest-quantum-boundary
/// first (on-demand before reserved at equal distance, then by id), skipping
/// any instance whose removal would drop capacity below `r_p`.
pub fn shutdown_spare_vms(pool: &VmPool, r_p: u64, params: &SpaParams) -> Vec<u64> {
    let mut candidates: Vec<&VmInstance> = pool
        .instances()
        .iter()
        .filter(|inst| {
            inst.status == VmStatus::Running && inst.intervals_running >= params.min_rental as u64
        })
        .collect();
    candidates.sort_by_key(|inst| {
        (
            inst.intervals_to_quantum_boundary(params.billing_quantum),
            match inst.tier {
                Tier::OnDemand => 0u8,
                Tier::Reserved => 1,
            },
            inst.id,
        )
    });

    let mut capacity = pool.running_capacity();
    let mut shutdowns = Vec::new();
    for inst in candidates {
        let cap = pool.capacities[inst.type_index];
        if capacity - cap >= r_p {
            capacity -= cap;
            shutdowns.push(inst.id);
        }
    }
    shutdowns
}
