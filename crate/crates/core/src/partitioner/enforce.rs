use std::cmp::Reverse;

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, ItemId};
use crate::placement::{PartId, Placement};
use crate::span::greedy_cover;

/// Moves single item copies out of overfull partitions until every partition
/// fits its capacity. Each step takes the most overfull partition and makes
/// the move with the smallest increase in total (multiplicity-weighted)
/// greedy span, lowest item then lowest destination on ties. A destination
/// must have room and must not already hold the item.
pub fn enforce_capacity(p: &Placement, h: &Hypergraph) -> Result<Placement> {
    let cap = p.capacity();
    let n = p.num_partitions();
    let mut loads = p.loads(h);
    let total: u128 = loads.iter().map(|&l| l as u128).sum();
    if total > cap as u128 * n as u128 {
        return Err(Error::Infeasible(format!(
            "placed weight {total} exceeds {n} partitions of capacity {cap}"
        )));
    }
    if loads.iter().all(|&l| l <= cap) {
        return Ok(p.clone());
    }
    let mut parts: Vec<Vec<ItemId>> = p.partitions().to_vec();
    let mut locs = p.locations(h.num_items());

    while let Some(src) = (0..n)
        .filter(|&g| loads[g] > cap)
        .max_by_key(|&g| (loads[g] - cap, Reverse(g)))
    {
        let mut best: Option<(i64, ItemId, PartId)> = None;
        for &v in &parts[src] {
            let w = h.weight(v);
            let before = span_sum(h, v, &locs)?;
            let original = locs[v].clone();
            for dest in 0..n {
                if dest == src || loads[dest] + w > cap || original.binary_search(&dest).is_ok() {
                    continue;
                }
                let moved = &mut locs[v];
                moved.retain(|&g| g != src);
                let at = moved.binary_search(&dest).unwrap_err();
                moved.insert(at, dest);
                let delta = span_sum(h, v, &locs)? as i64 - before as i64;
                locs[v].clone_from(&original);
                if best.is_none_or(|(d, _, _)| delta < d) {
                    best = Some((delta, v, dest));
                }
            }
        }
        let Some((_, v, dest)) = best else {
            return Err(Error::Infeasible(format!(
                "no single-item move relieves partition {src} (load {} > {cap})",
                loads[src]
            )));
        };
        let w = h.weight(v);
        parts[src].retain(|&u| u != v);
        let at = parts[dest].binary_search(&v).unwrap_err();
        parts[dest].insert(at, v);
        loads[src] -= w;
        loads[dest] += w;
        locs[v].retain(|&g| g != src);
        let at = locs[v].binary_search(&dest).unwrap_err();
        locs[v].insert(at, dest);
    }
    Ok(Placement::new(cap, parts))
}

fn span_sum(h: &Hypergraph, v: ItemId, locs: &[Vec<PartId>]) -> Result<u64> {
    let mut sum = 0;
    for &e in h.incident(v) {
        let edge = h.edge(e);
        let item_locs: Vec<&[PartId]> = edge.items().iter().map(|&u| locs[u].as_slice()).collect();
        sum += edge.multiplicity() * greedy_cover(edge.items(), &item_locs)?.span() as u64;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;
    use crate::span::average_span;

    fn total_span(p: &Placement, h: &Hypergraph) -> u64 {
        let r = average_span(p, h).unwrap();
        *r.average.numer() * h.total_multiplicity() / *r.average.denom()
    }

    #[test]
    fn single_repair_direction() {
        let h = build_hypergraph(&[vec![0, 1, 2, 3], vec![4]], None).unwrap();
        let p = Placement::new(3, vec![vec![0, 1, 2, 3], vec![4]]);
        let q = enforce_capacity(&p, &h).unwrap();
        assert_eq!(q.partition(0).len(), 3);
        assert_eq!(q.partition(1).len(), 2);
        assert_eq!(q.copy_counts(5), vec![1; 5]);
    }

    #[test]
    fn feasible_is_identity() {
        let h = build_hypergraph(&[vec![0, 1], vec![2]], None).unwrap();
        let p = Placement::new(2, vec![vec![0, 1], vec![2]]);
        assert_eq!(enforce_capacity(&p, &h).unwrap(), p);
    }

    #[test]
    fn over_total_capacity_errors() {
        let h = build_hypergraph(&[vec![0, 1, 2]], None).unwrap();
        let p = Placement::new(1, vec![vec![0, 1, 2], vec![]]);
        assert!(matches!(enforce_capacity(&p, &h), Err(Error::Infeasible(_))));
    }

    /// Every sequence of single-item moves out of partition 0 that ends
    /// feasible; returns the least total span reached.
    fn best_repair(p: &Placement, h: &Hypergraph, moves_left: usize) -> Option<u64> {
        if p.check_capacity(h).is_ok() {
            return Some(total_span(p, h));
        }
        if moves_left == 0 {
            return None;
        }
        let loads = p.loads(h);
        let mut best: Option<u64> = None;
        for &v in p.partition(0) {
            for dest in 1..p.num_partitions() {
                if loads[dest] + h.weight(v) > p.capacity() || p.contains(dest, v) {
                    continue;
                }
                let mut parts = p.partitions().to_vec();
                parts[0].retain(|&u| u != v);
                parts[dest].push(v);
                let next = Placement::new(p.capacity(), parts);
                if let Some(s) = best_repair(&next, h, moves_left - 1) {
                    best = Some(best.map_or(s, |b| b.min(s)));
                }
            }
        }
        best
    }

    #[test]
    fn two_item_overflow_matches_exhaustive_repair() {
        let h = build_hypergraph(
            &[vec![0, 1], vec![1, 2], vec![3, 5], vec![4, 5], vec![2, 3]],
            None,
        )
        .unwrap();
        let p = Placement::new(3, vec![vec![0, 1, 2, 3, 4], vec![5], vec![]]);
        let q = enforce_capacity(&p, &h).unwrap();
        q.check_capacity(&h).unwrap();
        assert_eq!(q.copy_counts(6), vec![1; 6]);
        assert_eq!(Some(total_span(&q, &h)), best_repair(&p, &h, 2));
    }
}
