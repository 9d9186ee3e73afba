//! VM type catalog: capacities, the three rental prices per type, and
//! per-interval price normalization.
//!
//! A catalog fixes two billing constants shared by every type: the lease
//! period (intervals covered by one reservation contract) and the billing
//! quantum (intervals per on-demand billing unit, e.g. 12 five-minute
//! intervals for hourly billing).

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VmTypeId(pub String);

impl VmTypeId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VmTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VmTypeId {
    fn from(s: &str) -> Self {
        VmTypeId(s.to_string())
    }
}

/// One rentable VM type: service capacity plus its three price components.
#[derive(Debug, Clone)]
pub struct VmType {
    pub id: VmTypeId,
    /// Demand units one running instance serves without violating the SLA.
    pub capacity: u64,
    /// One-time contract fee per reserved instance, for the whole lease.
    pub upfront_total: Money,
    /// Usage charge per interval for a launched reserved instance.
    pub reserved_usage_per_interval: Money,
    /// On-demand charge per billing quantum; partial quanta bill in full.
    pub on_demand_per_quantum: Money,
}

/// Validated catalog. Types are kept sorted by id so every search, ILP and
/// report iterates in one canonical order.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub billing_quantum: u32,
    pub lease_period: u32,
    types: Vec<VmType>,
    warnings: Vec<String>,
}

#[derive(Deserialize)]
struct CatalogFile {
    billing_quantum_intervals: i64,
    lease_period_intervals: i64,
    vm_types: Vec<VmTypeFile>,
}

#[derive(Deserialize)]
struct VmTypeFile {
    id: String,
    capacity: i64,
    upfront_total: f64,
    reserved_usage_per_interval: f64,
    on_demand_per_quantum: f64,
}

impl Catalog {
    pub fn load(path: &Path) -> Result<Catalog> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Catalog::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Catalog> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("catalog: {e}")))?;
        Catalog::from_file(file)
    }

    fn from_file(file: CatalogFile) -> Result<Catalog> {
        if file.billing_quantum_intervals < 1 {
            return Err(Error::Validation(format!(
                "billing_quantum_intervals must be >= 1, got {}",
                file.billing_quantum_intervals
            )));
        }
        if file.lease_period_intervals < file.billing_quantum_intervals {
            return Err(Error::Validation(format!(
                "lease_period_intervals ({}) must be >= billing_quantum_intervals ({})",
                file.lease_period_intervals, file.billing_quantum_intervals
            )));
        }
        if file.lease_period_intervals > u32::MAX as i64 {
            return Err(Error::Validation(format!(
                "lease_period_intervals ({}) is out of range",
                file.lease_period_intervals
            )));
        }
        if file.vm_types.is_empty() {
            return Err(Error::Validation("catalog has no vm_types".to_string()));
        }

        let mut seen = BTreeSet::new();
        let mut types = Vec::with_capacity(file.vm_types.len());
        for t in &file.vm_types {
            if !seen.insert(t.id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate vm type id {:?}",
                    t.id
                )));
            }
            if t.capacity < 1 {
                return Err(Error::Validation(format!(
                    "vm type {:?}: capacity must be >= 1, got {}",
                    t.id, t.capacity
                )));
            }
            for (field, value) in [
                ("upfront_total", t.upfront_total),
                ("reserved_usage_per_interval", t.reserved_usage_per_interval),
                ("on_demand_per_quantum", t.on_demand_per_quantum),
            ] {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Validation(format!(
                        "vm type {:?}: {field} must be a nonnegative number, got {value}",
                        t.id
                    )));
                }
            }
            types.push(VmType {
                id: VmTypeId(t.id.clone()),
                capacity: t.capacity as u64,
                upfront_total: Money::from_units(t.upfront_total),
                reserved_usage_per_interval: Money::from_units(t.reserved_usage_per_interval),
                on_demand_per_quantum: Money::from_units(t.on_demand_per_quantum),
            });
        }
        types.sort_by(|a, b| a.id.cmp(&b.id));

        let lease = file.lease_period_intervals as f64;
        let quantum = file.billing_quantum_intervals as f64;
        let mut warnings = Vec::new();
        for t in &types {
            // Reservation pays off only if a fully-used reserved instance is
            // cheaper per quantum than an on-demand one.
            let reserved_per_quantum = t.upfront_total.units() / lease * quantum
                + t.reserved_usage_per_interval.units() * quantum;
            if reserved_per_quantum >= t.on_demand_per_quantum.units() {
                warnings.push(format!(
                    "vm type {}: reservation can never pay off \
                     (upfront + usage per quantum {reserved_per_quantum:.6} >= \
                     on-demand per quantum {})",
                    t.id,
                    t.on_demand_per_quantum.units()
                ));
            }
        }

        Ok(Catalog {
            billing_quantum: file.billing_quantum_intervals as u32,
            lease_period: file.lease_period_intervals as u32,
            types,
            warnings,
        })
    }

    pub fn types(&self) -> &[VmType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn index_of(&self, id: &VmTypeId) -> Option<usize> {
        self.types.binary_search_by(|t| t.id.cmp(id)).ok()
    }

    /// Validation warnings collected at load time (never fatal).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Spread contract and quantum prices to per-interval rates for
    /// expectation math. Billing itself stays quantized.
    pub fn normalize(&self) -> Result<NormalizedPrices> {
        if self.lease_period < 1 {
            return Err(Error::Precondition(
                "lease_period must be >= 1 to normalize prices".to_string(),
            ));
        }
        if self.billing_quantum < 1 {
            return Err(Error::Precondition(
                "billing_quantum must be >= 1 to normalize prices".to_string(),
            ));
        }
        let per_type = self
            .types
            .iter()
            .map(|t| TypePrices {
                upfront_per_interval: t.upfront_total.units() / self.lease_period as f64,
                usage_per_interval: t.reserved_usage_per_interval.units(),
                on_demand_per_quantum: t.on_demand_per_quantum.units(),
                on_demand_per_interval: t.on_demand_per_quantum.units()
                    / self.billing_quantum as f64,
            })
            .collect();
        Ok(NormalizedPrices { per_type })
    }

    /// The type maximizing capacity per unit of per-interval upfront price.
    ///
    /// The ratio denominator is the amortized upfront price alone (the
    /// quantity the reservation ILP minimizes); usage charges are not part
    /// of the ranking. Ties break toward larger capacity, then smaller id.
    pub fn best_cp_type(&self) -> Result<&VmType> {
        if self.types.is_empty() {
            return Err(Error::Precondition("catalog is empty".to_string()));
        }
        // capacity_a / upfront_a > capacity_b / upfront_b compared exactly as
        // capacity_a * upfront_b > capacity_b * upfront_a (lease period is a
        // common factor, so raw upfront totals work).
        let better = |a: &VmType, b: &VmType| -> bool {
            let lhs = a.capacity as i128 * b.upfront_total.micro() as i128;
            let rhs = b.capacity as i128 * a.upfront_total.micro() as i128;
            if lhs != rhs {
                return lhs > rhs;
            }
            if a.capacity != b.capacity {
                return a.capacity > b.capacity;
            }
            a.id < b.id
        };
        let mut best = &self.types[0];
        for t in &self.types[1..] {
            if better(t, best) {
                best = t;
            }
        }
        Ok(best)
    }
}

/// Per-interval price view of a catalog, aligned with `Catalog::types()`.
#[derive(Debug, Clone)]
pub struct NormalizedPrices {
    per_type: Vec<TypePrices>,
}

#[derive(Debug, Clone, Copy)]
pub struct TypePrices {
    pub upfront_per_interval: f64,
    pub usage_per_interval: f64,
    pub on_demand_per_quantum: f64,
    pub on_demand_per_interval: f64,
}

impl NormalizedPrices {
    pub fn for_type(&self, index: usize) -> &TypePrices {
        &self.per_type[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TypePrices> {
        self.per_type.iter()
    }
}
