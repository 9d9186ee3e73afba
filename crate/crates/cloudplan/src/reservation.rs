//! Long-term reservation optimization.
//!
//! Phase 1 works on the single-type expected-cost model first: with a
//! discrete demand distribution D (in whole instances of one type) and
//! per-interval prices, reserving `r` instances costs
//!
//! ```text
//! cost(r) = r·p_up + p_use·E[min(D, r)] + p_od·E[(D − r)⁺]
//! ```
//!
//! per interval. The forward difference is
//! `Δ(r) = p_up + (p_use − p_od)·P(D ≥ r+1)`, nondecreasing in `r`, so the
//! smallest `r` with `Δ(r) ≥ 0` is the smallest minimizer. That optimum,
//! taken for the type with the best capacity/price ratio, pins a window of
//! candidate reserved-demand values; each candidate is covered by an exact
//! ILP over all types and the cheapest full mixed plan wins.

use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::Serialize;

use crate::catalog::{Catalog, NormalizedPrices, TypePrices, VmTypeId};
use crate::cover::{min_cost_cover, CoverItem};
use crate::demand::DemandDistribution;
use crate::error::{Error, Result};

/// Long-term contract: instance quantities per type for one lease period.
#[derive(Debug, Clone, Serialize)]
pub struct ReservationPlan {
    pub lease_period: u32,
    pub quantities: BTreeMap<VmTypeId, u64>,
    pub reserved_capacity: u64,
    pub expected_cost_per_interval: f64,
}

impl ReservationPlan {
    pub fn empty(catalog: &Catalog, expected_cost_per_interval: f64) -> Self {
        ReservationPlan {
            lease_period: catalog.lease_period,
            quantities: catalog.types().iter().map(|t| (t.id.clone(), 0)).collect(),
            reserved_capacity: 0,
            expected_cost_per_interval,
        }
    }

    pub fn quantity(&self, id: &VmTypeId) -> u64 {
        self.quantities.get(id).copied().unwrap_or(0)
    }

    pub fn total_instances(&self) -> u64 {
        self.quantities.values().sum()
    }
}

/// Result of the full plan search, including the single-type diagnostics.
#[derive(Debug, Clone)]
pub struct PlanSearch {
    pub plan: ReservationPlan,
    pub best_cp: VmTypeId,
    pub r_star: u64,
    /// Single-type window `[max(r*−1, 0), r*]` whose capacity multiples feed
    /// the covering ILP.
    pub window: (u64, u64),
}

/// Expected per-interval cost of reserving `r` instances of one type against
/// a demand distribution expressed in instances of that type.
pub fn expected_cost_single(dist: &DemandDistribution, r: u64, prices: &TypePrices) -> f64 {
    let mut expected_used = 0.0; // E[min(D, r)]
    let mut expected_overflow = 0.0; // E[(D - r)+]
    for (d, p) in dist.iter() {
        expected_used += p * d.min(r) as f64;
        expected_overflow += p * d.saturating_sub(r) as f64;
    }
    r as f64 * prices.upfront_per_interval
        + prices.usage_per_interval * expected_used
        + prices.on_demand_per_interval * expected_overflow
}

/// Smallest minimizer of `expected_cost_single` plus the window endpoints
/// `(max(r*−1, 0), r*)` handed to the multi-type search.
pub fn optimal_reservation_single(
    dist: &DemandDistribution,
    prices: &TypePrices,
) -> Result<(u64, u64, u64)> {
    if prices.on_demand_per_interval <= prices.usage_per_interval {
        // Overflow is never dearer than reserved usage: reserving cannot pay.
        return Ok((0, 0, 0));
    }

    // Suffix sums give P(D >= support[i]) without accumulation drift.
    let probs = dist.probs();
    let mut suffix = vec![0.0; probs.len() + 1];
    for i in (0..probs.len()).rev() {
        suffix[i] = suffix[i + 1] + probs[i];
    }

    let support = dist.support();
    let max_support = dist.max_support();
    let mut next = 0; // first support index with value > r
    let mut r_star = max_support;
    for r in 0..=max_support {
        while next < support.len() && support[next] <= r {
            next += 1;
        }
        let tail = suffix[next]; // P(D >= r + 1)
        let delta = prices.upfront_per_interval
            + (prices.usage_per_interval - prices.on_demand_per_interval) * tail;
        if delta >= 0.0 {
            r_star = r;
            break;
        }
    }
    Ok((r_star, r_star.saturating_sub(1), r_star))
}

/// Exact covering ILP: quantities minimizing total upfront cost subject to
/// `sum(n_i * C_i) >= reserved_demand`. Ties resolve to the
/// lexicographically smallest quantity vector in id order.
pub fn solve_covering_ilp(
    catalog: &Catalog,
    reserved_demand: u64,
) -> Result<BTreeMap<VmTypeId, u64>> {
    let counts = covering_counts(catalog, reserved_demand)?;
    Ok(catalog
        .types()
        .iter()
        .zip(counts)
        .map(|(t, n)| (t.id.clone(), n))
        .collect())
}

/// Same as [`solve_covering_ilp`] but indexed like `catalog.types()`.
pub(crate) fn covering_counts(catalog: &Catalog, reserved_demand: u64) -> Result<Vec<u64>> {
    if catalog.is_empty() && reserved_demand > 0 {
        return Err(Error::Precondition(
            "cannot cover demand with an empty catalog".to_string(),
        ));
    }
    let items: Vec<CoverItem> = catalog
        .types()
        .iter()
        .map(|t| CoverItem {
            capacity: t.capacity,
            cost_micro: t.upfront_total.micro(),
            max_count: u64::MAX,
        })
        .collect();
    let (counts, _) = min_cost_cover(&items, reserved_demand)
        .expect("unbounded counts make any demand coverable");
    Ok(counts)
}

/// Expected per-interval cost of running a mixed reservation against the raw
/// demand distribution: amortized upfront for every contracted instance,
/// usage for the instances actually launched, and minimum-cost on-demand
/// coverage of any overflow.
///
/// When demand is below the reserved capacity, reserved instances launch in
/// cheapest-usage-per-capacity order until the launched capacity reaches
/// demand.
pub fn expected_plan_cost(
    quantities: &[u64],
    catalog: &Catalog,
    prices: &NormalizedPrices,
    raw_dist: &DemandDistribution,
) -> f64 {
    let types = catalog.types();
    assert_eq!(quantities.len(), types.len());

    let reserved_capacity: u64 = quantities
        .iter()
        .zip(types)
        .map(|(n, t)| n * t.capacity)
        .sum();
    let upfront: f64 = quantities
        .iter()
        .enumerate()
        .map(|(i, n)| *n as f64 * prices.for_type(i).upfront_per_interval)
        .sum();

    // Launch order: cheapest usage per unit of capacity first, compared
    // exactly; id order breaks ties (types are already id-sorted).
    let mut launch_order: Vec<usize> = (0..types.len()).collect();
    launch_order.sort_by(|&a, &b| {
        let lhs = types[a].reserved_usage_per_interval.micro() as i128 * types[b].capacity as i128;
        let rhs = types[b].reserved_usage_per_interval.micro() as i128 * types[a].capacity as i128;
        lhs.cmp(&rhs).then(a.cmp(&b))
    });

    let od_items: Vec<CoverItem> = types
        .iter()
        .map(|t| CoverItem {
            capacity: t.capacity,
            cost_micro: t.on_demand_per_quantum.micro(),
            max_count: u64::MAX,
        })
        .collect();
    let mut od_cache: HashMap<u64, f64> = HashMap::new();
    let quantum = catalog.billing_quantum as f64;

    let mut expected = upfront;
    for (demand, p) in raw_dist.iter() {
        let needed = demand.min(reserved_capacity);
        let mut launched_capacity = 0u64;
        let mut usage = 0.0;
        for &i in &launch_order {
            if launched_capacity >= needed {
                break;
            }
            let cap = types[i].capacity;
            let take = (needed - launched_capacity)
                .div_ceil(cap)
                .min(quantities[i]);
            launched_capacity += take * cap;
            usage += take as f64 * prices.for_type(i).usage_per_interval;
        }

        let overflow = demand.saturating_sub(reserved_capacity);
        let od = if overflow == 0 {
            0.0
        } else {
            *od_cache.entry(overflow).or_insert_with(|| {
                let (_, micro) = min_cost_cover(&od_items, overflow)
                    .expect("unbounded counts make any overflow coverable");
                micro as f64 / quantum / 1e6
            })
        };
        expected += p * (usage + od);
    }
    expected
}

/// Full phase-1 search: pick the best capacity/price type, optimize the
/// single-type count, then evaluate every integer reserved-demand candidate
/// in `{0} ∪ [lo·C, hi·C]` through the covering ILP and keep the cheapest
/// mixed plan.
pub fn plan_reservation(
    raw_dist: &DemandDistribution,
    catalog: &Catalog,
    prices: &NormalizedPrices,
) -> Result<PlanSearch> {
    let best = catalog.best_cp_type()?;
    let best_id = best.id.clone();
    let best_index = catalog.index_of(&best_id).expect("best type is in catalog");
    let capacity = best.capacity;

    let vm_dist = raw_dist.to_vm_units(capacity)?;
    let (r_star, lo, hi) = optimal_reservation_single(&vm_dist, prices.for_type(best_index))?;

    let mut candidates: Vec<u64> = vec![0];
    candidates.extend(lo * capacity..=hi * capacity);
    candidates.dedup();

    let mut best_plan: Option<(f64, u64, Vec<u64>)> = None;
    for candidate in candidates {
        let counts = covering_counts(catalog, candidate)?;
        let cost = expected_plan_cost(&counts, catalog, prices, raw_dist);
        let reserved_capacity: u64 = counts
            .iter()
            .zip(catalog.types())
            .map(|(n, t)| n * t.capacity)
            .sum();
        let replace = match &best_plan {
            None => true,
            Some((c, cap, vec)) => (cost, reserved_capacity, &counts) < (*c, *cap, vec),
        };
        if replace {
            best_plan = Some((cost, reserved_capacity, counts));
        }
    }
    let (cost, reserved_capacity, counts) = best_plan.expect("candidate set is never empty");

    let plan = ReservationPlan {
        lease_period: catalog.lease_period,
        quantities: catalog
            .types()
            .iter()
            .zip(&counts)
            .map(|(t, &n)| (t.id.clone(), n))
            .collect(),
        reserved_capacity,
        expected_cost_per_interval: cost,
    };
    Ok(PlanSearch {
        plan,
        best_cp: best_id,
        r_star,
        window: (lo, hi),
    })
}
