//! Exhaustive reference solvers for micro instances.
//!
//! Everything here is exponential and only meant for validating the
//! heuristics on tiny inputs (roughly 12 items / 12 partitions or fewer).
//! None of it is used by the placement algorithms.

use num_rational::Ratio;

use crate::hypergraph::{Hypergraph, ItemId, Weight};
use crate::placement::{PartId, Placement};

const MAX_ENUM_BITS: usize = 24;

/// Minimum number of partitions covering `items`; `locs[v]` lists the
/// partitions holding item `v`. `None` if some item is unplaced.
pub fn exact_span(items: &[ItemId], locs: &[Vec<PartId>]) -> Option<usize> {
    let mut parts: Vec<PartId> = items.iter().flat_map(|&v| locs[v].iter().copied()).collect();
    parts.sort_unstable();
    parts.dedup();
    assert!(parts.len() <= MAX_ENUM_BITS, "too many partitions for exhaustive search");
    let full: u64 = (1u64 << items.len()) - 1;
    let masks: Vec<u64> = parts
        .iter()
        .map(|p| {
            items
                .iter()
                .enumerate()
                .filter(|(_, &v)| locs[v].contains(p))
                .fold(0, |m, (i, _)| m | (1 << i))
        })
        .collect();
    min_subset_cover(&masks, full)
}

fn min_subset_cover(masks: &[u64], full: u64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for subset in 0u64..(1 << masks.len()) {
        let size = subset.count_ones() as usize;
        if best.is_some_and(|b| size >= b) {
            continue;
        }
        let covered = (0..masks.len())
            .filter(|i| subset >> i & 1 == 1)
            .fold(0, |m, i| m | masks[i]);
        if covered & full == full {
            best = Some(size);
        }
    }
    best
}

/// Exact minimum average span (multiplicity-weighted).
pub fn exact_average_span(p: &Placement, h: &Hypergraph) -> Option<Ratio<u64>> {
    let locs = p.locations(h.num_items());
    let mut total = 0u64;
    for e in h.edges() {
        total += e.multiplicity() * exact_span(e.items(), &locs)? as u64;
    }
    Some(Ratio::new(total, h.total_multiplicity()))
}

/// A minimum-cardinality hitting set (lexicographically first among the
/// smallest, by subset enumeration order).
pub fn exact_hitting_set(sets: &[Vec<PartId>]) -> Vec<PartId> {
    let mut universe: Vec<PartId> = sets.iter().flatten().copied().collect();
    universe.sort_unstable();
    universe.dedup();
    assert!(universe.len() <= MAX_ENUM_BITS, "universe too large");
    let set_masks: Vec<u64> = sets
        .iter()
        .map(|s| {
            s.iter()
                .map(|g| universe.binary_search(g).unwrap())
                .fold(0, |m, i| m | (1 << i))
        })
        .collect();
    let mut best: Option<u64> = None;
    for subset in 0u64..(1 << universe.len()) {
        if best.is_some_and(|b| subset.count_ones() >= b.count_ones()) {
            continue;
        }
        if set_masks.iter().all(|&m| m & subset != 0) {
            best = Some(subset);
        }
    }
    let best = best.unwrap_or(0);
    (0..universe.len())
        .filter(|i| best >> i & 1 == 1)
        .map(|i| universe[i])
        .collect()
}

/// The item subset of total weight at most `budget` inducing the most
/// (multiplicity-weighted) edges. Returns the subset and its edge count.
pub fn densest_subgraph(h: &Hypergraph, budget: Weight) -> (Vec<ItemId>, u64) {
    let n = h.num_items();
    assert!(n <= MAX_ENUM_BITS, "too many items for exhaustive search");
    let edge_masks: Vec<(u64, u64)> = h
        .edges()
        .iter()
        .map(|e| (e.items().iter().fold(0, |m, &v| m | (1 << v)), e.multiplicity()))
        .collect();
    let mut best = (0u64, 0u64);
    for subset in 0u64..(1 << n) {
        let w: Weight = (0..n).filter(|v| subset >> v & 1 == 1).map(|v| h.weight(v)).sum();
        if w > budget {
            continue;
        }
        let induced: u64 = edge_masks
            .iter()
            .filter(|(m, _)| m & subset == *m)
            .map(|(_, mult)| mult)
            .sum();
        if induced > best.1 {
            best = (subset, induced);
        }
    }
    ((0..n).filter(|v| best.0 >> v & 1 == 1).collect(), best.1)
}

/// Fewest bins of size `capacity` that hold `weights`, by exhaustive
/// assignment.
pub fn min_bins(weights: &[Weight], capacity: Weight) -> Option<usize> {
    if weights.iter().any(|&w| w > capacity) {
        return None;
    }
    (1..=weights.len().max(1)).find(|&k| fits_in(weights, capacity, &mut vec![0; k], 0))
}

fn fits_in(weights: &[Weight], capacity: Weight, bins: &mut [Weight], i: usize) -> bool {
    if i == weights.len() {
        return true;
    }
    for b in 0..bins.len() {
        if bins[b] + weights[i] <= capacity {
            bins[b] += weights[i];
            if fits_in(weights, capacity, bins, i + 1) {
                return true;
            }
            bins[b] -= weights[i];
        }
        // empty bins are interchangeable
        if bins[b] == 0 {
            break;
        }
    }
    false
}

/// Connectivity cost `sum_e m_e * (lambda_e - 1)` of a disjoint assignment.
pub fn connectivity_cost(h: &Hypergraph, assignment: &[PartId]) -> u64 {
    h.edges()
        .iter()
        .map(|e| {
            let mut parts: Vec<PartId> = e.items().iter().map(|&v| assignment[v]).collect();
            parts.sort_unstable();
            parts.dedup();
            e.multiplicity() * (parts.len() as u64 - 1)
        })
        .sum()
}

/// Minimum connectivity cost over all assignments into `k` partitions of
/// weight at most `max_load` each.
pub fn min_connectivity(h: &Hypergraph, k: usize, max_load: Weight) -> Option<u64> {
    let n = h.num_items();
    let total = (k as f64).powi(n as i32);
    assert!(total <= 5e6, "too many assignments for exhaustive search");
    let mut assignment = vec![0; n];
    let mut best = None;
    loop {
        let mut loads = vec![0; k];
        for (v, &p) in assignment.iter().enumerate() {
            loads[p] += h.weight(v);
        }
        if loads.iter().all(|&l| l <= max_load) {
            let c = connectivity_cost(h, &assignment);
            if best.is_none_or(|b| c < b) {
                best = Some(c);
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            assignment[i] += 1;
            if assignment[i] < k {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;

    #[test]
    fn exact_span_small() {
        let locs = vec![vec![0, 2], vec![0], vec![1, 2]];
        assert_eq!(exact_span(&[0, 1, 2], &locs), Some(2));
        assert_eq!(exact_span(&[0, 2], &locs), Some(1));
        assert_eq!(exact_span(&[0], &[vec![]]), None);
    }

    #[test]
    fn bins() {
        assert_eq!(min_bins(&[30, 30, 30], 50), Some(3));
        assert_eq!(min_bins(&[20, 30, 50], 50), Some(2));
        assert_eq!(min_bins(&[60], 50), None);
    }

    #[test]
    fn connectivity_brute_force() {
        let h = build_hypergraph(&[vec![0, 1], vec![1, 2], vec![2, 3]], None).unwrap();
        assert_eq!(min_connectivity(&h, 2, 2), Some(1));
        assert_eq!(min_connectivity(&h, 4, 1), Some(3));
    }
}
