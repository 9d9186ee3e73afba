//! Workload traces, windowed aggregation, and the empirical demand
//! distribution that drives long-term planning.

use std::fs::File;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use crate::error::{Error, Result};

/// Ordered demand samples, one per short-term interval. Demand is an
/// abstract nonnegative integer (concurrent users / request rate); VM
/// capacities are expressed in the same unit.
#[derive(Debug, Clone)]
pub struct DemandTrace {
    pub interval_seconds: u32,
    samples: Vec<u64>,
}

impl DemandTrace {
    pub fn new(interval_seconds: u32, samples: Vec<u64>) -> Result<Self> {
        if interval_seconds == 0 {
            return Err(Error::Validation(
                "interval_seconds must be > 0".to_string(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::Validation("trace contains no samples".to_string()));
        }
        Ok(DemandTrace {
            interval_seconds,
            samples,
        })
    }

    /// Read a `interval_index,demand` CSV. A non-numeric first row is
    /// treated as a header. Negative demand is rejected.
    pub fn load(path: &Path, interval_seconds: u32) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(file);

        let mut samples = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("trace row {}: {e}", row + 1)))?;
            if record.len() != 2 {
                return Err(Error::Parse(format!(
                    "trace row {}: expected 2 columns, got {}",
                    row + 1,
                    record.len()
                )));
            }
            let parsed = record[0]
                .parse::<i64>()
                .and_then(|_| record[1].parse::<i64>());
            let demand = match parsed {
                Ok(d) => d,
                Err(e) if row == 0 => {
                    // optional header line
                    let _ = e;
                    continue;
                }
                Err(e) => {
                    return Err(Error::Parse(format!("trace row {}: {e}", row + 1)));
                }
            };
            if demand < 0 {
                return Err(Error::Validation(format!(
                    "trace row {}: negative demand {demand}",
                    row + 1
                )));
            }
            samples.push(demand as u64);
        }
        DemandTrace::new(interval_seconds, samples)
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_demand(&self) -> u64 {
        self.samples.iter().copied().max().unwrap_or(0)
    }

    /// Convert raw demand to whole instances of a reference type:
    /// each sample becomes `ceil(d / capacity)`.
    pub fn to_vm_units(&self, capacity: u64) -> Result<DemandTrace> {
        if capacity < 1 {
            return Err(Error::Precondition("capacity must be >= 1".to_string()));
        }
        let samples = self.samples.iter().map(|&d| d.div_ceil(capacity)).collect();
        Ok(DemandTrace {
            interval_seconds: self.interval_seconds,
            samples,
        })
    }

    /// Reduce the trace to one sample per window. The trailing partial
    /// window, if any, is reduced as-is.
    pub fn aggregate(&self, window: Window, reducer: Reducer) -> Result<DemandTrace> {
        let window_seconds = window.seconds();
        let per_window = (window_seconds / self.interval_seconds as u64) as usize;
        if per_window == 0 {
            return Err(Error::Precondition(format!(
                "window {window} ({window_seconds}s) is shorter than one interval \
                 ({}s)",
                self.interval_seconds
            )));
        }
        if self.samples.len() < per_window {
            return Err(Error::Precondition(format!(
                "trace ({} samples) does not cover one full {window} window \
                 ({per_window} intervals)",
                self.samples.len()
            )));
        }
        let samples = self
            .samples
            .chunks(per_window)
            .map(|chunk| reducer.reduce(chunk))
            .collect();
        Ok(DemandTrace {
            interval_seconds: window_seconds.min(u32::MAX as u64) as u32,
            samples,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Daily,
    Weekly,
    /// 30 days.
    Monthly,
}

impl Window {
    pub fn seconds(self) -> u64 {
        match self {
            Window::Daily => 86_400,
            Window::Weekly => 604_800,
            Window::Monthly => 2_592_000,
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Window::Daily => "daily",
            Window::Weekly => "weekly",
            Window::Monthly => "monthly",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reducer {
    Max,
    /// Arithmetic mean, rounded up (provisioning-safe).
    Mean,
    /// 95th percentile, nearest-rank.
    P95,
}

impl Reducer {
    fn reduce(self, chunk: &[u64]) -> u64 {
        match self {
            Reducer::Max => chunk.iter().copied().max().unwrap_or(0),
            Reducer::Mean => {
                let sum: u64 = chunk.iter().sum();
                sum.div_ceil(chunk.len() as u64)
            }
            Reducer::P95 => {
                let mut sorted = chunk.to_vec();
                sorted.sort_unstable();
                // nearest-rank: ceil(0.95 * n)
                let rank = (19 * sorted.len()).div_ceil(20);
                sorted[rank - 1]
            }
        }
    }
}

/// Discrete demand distribution: strictly ascending support with matching
/// positive probabilities summing to one.
#[derive(Debug, Clone, Serialize)]
pub struct DemandDistribution {
    support: Vec<u64>,
    probs: Vec<f64>,
}

impl DemandDistribution {
    /// Empirical frequencies of the trace samples.
    pub fn from_trace(trace: &DemandTrace) -> Self {
        let mut counts = std::collections::BTreeMap::new();
        for &s in trace.samples() {
            *counts.entry(s).or_insert(0u64) += 1;
        }
        let n = trace.len() as f64;
        let (support, probs) = counts.into_iter().map(|(v, c)| (v, c as f64 / n)).unzip();
        DemandDistribution { support, probs }
    }

    pub fn from_pairs(pairs: &[(u64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Validation("distribution has no support".to_string()));
        }
        let mut pairs = pairs.to_vec();
        pairs.sort_by_key(|&(v, _)| v);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Validation(format!(
                    "duplicate support value {}",
                    w[0].0
                )));
            }
        }
        let total: f64 = pairs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        if pairs.iter().any(|&(_, p)| p <= 0.0) {
            return Err(Error::Validation(
                "probabilities must be positive".to_string(),
            ));
        }
        let (support, probs) = pairs.into_iter().unzip();
        Ok(DemandDistribution { support, probs })
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn max_support(&self) -> u64 {
        *self.support.last().expect("nonempty support")
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(v, p)| v as f64 * p).sum()
    }

    /// Tail probability strictly above `r`: P(D >= r + 1).
    pub fn ccdf(&self, r: i64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .rev()
            .take_while(|&(&v, _)| v as i64 > r)
            .map(|(_, p)| p)
            .sum()
    }

    /// Map the distribution into whole instances of capacity `capacity`,
    /// merging support values that collide.
    pub fn to_vm_units(&self, capacity: u64) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::Precondition("capacity must be >= 1".to_string()));
        }
        let mut merged = std::collections::BTreeMap::new();
        for (v, p) in self.iter() {
            *merged.entry(v.div_ceil(capacity)).or_insert(0.0) += p;
        }
        let (support, probs) = merged.into_iter().unzip();
        Ok(DemandDistribution { support, probs })
    }
}

impl<'a> IntoIterator for &'a DemandDistribution {
    type Item = (u64, f64);
    type IntoIter = std::iter::Zip<
        std::iter::Copied<std::slice::Iter<'a, u64>>,
        std::iter::Copied<std::slice::Iter<'a, f64>>,
    >;

    fn into_iter(self) -> Self::IntoIter {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }
}
