//! Exact minimum-cost covering of an integer demand by typed items.
//!
//! Depth-first branch and bound over per-type counts. Counts are bounded by
//! `ceil(remaining / capacity)` (any optimum exceeding that bound can drop an
//! item and stay feasible at no extra cost), partial costs prune against the
//! incumbent. Counts are explored in ascending order so the first optimum
//! found is the lexicographically smallest one; pruning is strict (`>`) so
//! zero-cost items cannot knock out an equal-cost, lexicographically smaller
//! solution.

#[derive(Debug, Clone, Copy)]
pub(crate) struct CoverItem {
    pub capacity: u64,
    pub cost_micro: i64,
    /// Per-type availability; `u64::MAX` means unbounded.
    pub max_count: u64,
}

/// Minimize `sum(n_i * cost_i)` subject to `sum(n_i * capacity_i) >= demand`
/// and `0 <= n_i <= max_count_i`. Returns `(counts, total_cost_micro)` or
/// `None` when the available capacity cannot cover the demand.
pub(crate) fn min_cost_cover(items: &[CoverItem], demand: u64) -> Option<(Vec<u64>, i64)> {
    if demand == 0 {
        return Some((vec![0; items.len()], 0));
    }
    if items.is_empty() {
        return None;
    }

    // Capacity still reachable from item i onward, saturating.
    let mut suffix_capacity = vec![0u64; items.len() + 1];
    for (i, item) in items.iter().enumerate().rev() {
        let own = if item.max_count == u64::MAX {
            u64::MAX
        } else {
            item.capacity.saturating_mul(item.max_count)
        };
        suffix_capacity[i] = suffix_capacity[i + 1].saturating_add(own);
    }
    if suffix_capacity[0] < demand {
        return None;
    }

    struct Search<'a> {
        items: &'a [CoverItem],
        suffix_capacity: &'a [u64],
        current: Vec<u64>,
        best: Option<(Vec<u64>, i64)>,
    }

    impl Search<'_> {
        fn dfs(&mut self, index: usize, remaining: u64, cost: i64) {
            if remaining == 0 {
                // Remaining counts stay zero: cheapest and smallest completion.
                if self.best.as_ref().is_none_or(|(_, b)| cost < *b) {
                    let mut counts = self.current.clone();
                    counts.resize(self.items.len(), 0);
                    self.best = Some((counts, cost));
                }
                return;
            }
            if index == self.items.len() || self.suffix_capacity[index] < remaining {
                return;
            }
            let item = self.items[index];
            let bound = remaining.div_ceil(item.capacity).min(item.max_count);
            for n in 0..=bound {
                let cost = cost + n as i64 * item.cost_micro;
                if self.best.as_ref().is_some_and(|(_, b)| cost > *b) {
                    break; // cost grows with n
                }
                self.current.push(n);
                self.dfs(index + 1, remaining.saturating_sub(n * item.capacity), cost);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        items,
        suffix_capacity: &suffix_capacity,
        current: Vec::with_capacity(items.len()),
        best: None,
    };
    search.dfs(0, demand, 0);
    search.best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(capacity: u64, cost_units: f64) -> CoverItem {
        CoverItem {
            capacity,
            cost_micro: (cost_units * 1e6) as i64,
            max_count: u64::MAX,
        }
    }

    #[test]
    fn zero_demand_is_empty_cover() {
        let (counts, cost) = min_cost_cover(&[item(3, 2.5)], 0).unwrap();
        assert_eq!(counts, vec![0]);
        assert_eq!(cost, 0);
    }

    #[test]
    fn single_type_takes_ceiling() {
        let (counts, _) = min_cost_cover(&[item(4, 1.0)], 10).unwrap();
        assert_eq!(counts, vec![3]);
    }

    #[test]
    fn mixes_types_when_cheaper() {
        // demand 7 with A(cap 1, 1.0) and B(cap 3, 2.5): {A:1, B:2} costs 6.0.
        let (counts, cost) = min_cost_cover(&[item(1, 1.0), item(3, 2.5)], 7).unwrap();
        assert_eq!(counts, vec![1, 2]);
        assert_eq!(cost, 6_000_000);
    }

    #[test]
    fn respects_availability_bounds() {
        let mut a = item(2, 1.0);
        a.max_count = 2;
        let b = item(5, 10.0);
        let (counts, cost) = min_cost_cover(&[a, b], 9).unwrap();
        // Only two cap-2 items available, so one cap-5 is forced.
        assert_eq!(counts, vec![2, 1]);
        assert_eq!(cost, 12_000_000);
        a.max_count = 1;
        let (counts, _) = min_cost_cover(&[a, b], 9).unwrap();
        assert_eq!(counts, vec![0, 2]);
    }

    #[test]
    fn infeasible_returns_none() {
        let mut a = item(2, 1.0);
        a.max_count = 3;
        assert!(min_cost_cover(&[a], 7).is_none());
        assert!(min_cost_cover(&[], 1).is_none());
    }

    #[test]
    fn zero_cost_items_keep_lexicographic_tiebreak() {
        // Both optima cost 0; {0, 2} is lexicographically smaller than
        // {1, x}. Strict pruning must not discard it.
        let free_small = item(1, 0.0);
        let free_big = item(3, 0.0);
        let (counts, cost) = min_cost_cover(&[free_small, free_big], 5).unwrap();
        assert_eq!(cost, 0);
        assert_eq!(counts, vec![0, 2]);
    }
}
