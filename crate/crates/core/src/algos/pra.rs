use crate::error::{Error, Result};
use crate::hypergraph::{EdgeId, Hyperedge, Hypergraph, ItemId, Weight};
use crate::partitioner::enforce_capacity;
use crate::placement::{PartId, Placement, ReplicaLedger};
use crate::span::hitting_set;

use super::{check_partitions, hpa_baseline, hpa_fit, sub_seed};

/// Pre-replication: copies of high-scoring items are created in the
/// hypergraph itself, incident queries are distributed over the copies by a
/// hitting set of their spanning partitions, and the rewritten hypergraph is
/// partitioned once more into `N` parts.
pub fn pra(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    pra_with_ledger(h, n, c, seed).map(|(p, _)| p)
}

/// [`pra`] plus the record of which queries each copy serves.
pub fn pra_with_ledger(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<(Placement, ReplicaLedger)> {
    check_partitions(h, n, c)?;
    let base = hpa_baseline(h, n, c, seed)?;
    let full_budget = (n - base.num_partitions()) as Weight * c;
    let mut budget = full_budget;
    loop {
        let rw = replicate(h, &base, budget)?;
        match finish(h, &rw, n, c, seed) {
            Ok(p) => return Ok((p, rw.ledger)),
            Err(Error::Infeasible(_)) if budget > 0 => budget = budget * 9 / 10,
            Err(e) => return Err(e),
        }
    }
}

/// The hypergraph `H^r` over original items and their copies.
pub(crate) struct Rewritten {
    pub(crate) hypergraph: Hypergraph,
    /// original item of every `H^r` node
    pub(crate) origin: Vec<ItemId>,
    pub(crate) ledger: ReplicaLedger,
}

/// `score_v`: multiplicity-weighted count of multi-item queries in which `v`
/// is the only item from its own partition.
pub(crate) fn scores(h: &Hypergraph, part_of: &[PartId]) -> Vec<u64> {
    (0..h.num_items())
        .map(|v| {
            h.incident(v)
                .iter()
                .map(|&e| h.edge(e))
                .filter(|e| e.len() > 1 && e.items().iter().all(|&u| u == v || part_of[u] != part_of[v]))
                .map(Hyperedge::multiplicity)
                .sum()
        })
        .collect()
}

/// Partitions spanned by the other items of `e` under a disjoint layout.
pub(crate) fn spanning_without(e: &Hyperedge, v: ItemId, part_of: &[PartId]) -> Vec<PartId> {
    let mut s: Vec<PartId> = e.items().iter().filter(|&&u| u != v).map(|&u| part_of[u]).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// Hitting set of `sets` (in pick order) and, for every set, the index in it
/// of the copy serving that set: the hitting element with the lowest
/// partition id among those the set contains.
pub(crate) fn assign_copies(sets: &[Vec<PartId>]) -> Result<(Vec<PartId>, Vec<usize>)> {
    let s = hitting_set(sets)?;
    let assignment = sets
        .iter()
        .map(|set| {
            (0..s.len())
                .filter(|&i| set.contains(&s[i]))
                .min_by_key(|&i| s[i])
                .expect("hitting set meets every set")
        })
        .collect();
    Ok((s, assignment))
}

fn replicate(h: &Hypergraph, base: &Placement, budget: Weight) -> Result<Rewritten> {
    let part_of: Vec<PartId> = base.locations(h.num_items()).iter().map(|l| l[0]).collect();
    let score = scores(h, &part_of);
    let mut order: Vec<ItemId> = (0..h.num_items()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(score[v]), v));

    let mut edges: Vec<Vec<ItemId>> = h.edges().iter().map(|e| e.items().to_vec()).collect();
    let mut weights: Vec<Weight> = h.weights().to_vec();
    let mut origin: Vec<ItemId> = (0..h.num_items()).collect();
    let mut ledger = ReplicaLedger {
        copies: (0..h.num_items()).map(|v| vec![h.incident(v).to_vec()]).collect(),
    };
    let mut used: Weight = 0;
    for v in order {
        if score[v] == 0 {
            // every remaining item shares each of its queries with a
            // same-partition item, so its hitting set is its own partition
            break;
        }
        let multi: Vec<EdgeId> = h.incident(v).iter().copied().filter(|&e| h.edge(e).len() > 1).collect();
        let sets: Vec<Vec<PartId>> = multi.iter().map(|&e| spanning_without(h.edge(e), v, &part_of)).collect();
        let (s, assignment) = assign_copies(&sets)?;
        if s.len() < 2 {
            continue;
        }
        let extra = (s.len() as Weight - 1) * h.weight(v);
        if used + extra > budget {
            break;
        }
        used += extra;
        let mut ids = vec![v];
        for _ in 1..s.len() {
            ids.push(weights.len());
            weights.push(h.weight(v));
            origin.push(v);
        }
        let mut groups: Vec<Vec<EdgeId>> = vec![Vec::new(); s.len()];
        for (&e, &copy) in multi.iter().zip(&assignment) {
            groups[copy].push(e);
            if copy > 0 {
                let slot = edges[e].iter().position(|&u| u == v).expect("item in its edge");
                edges[e][slot] = ids[copy];
            }
        }
        // singleton queries stay with the original
        groups[0].extend(h.incident(v).iter().copied().filter(|&e| h.edge(e).len() == 1));
        groups[0].sort_unstable();
        ledger.copies[v] = groups;
    }
    let edges = edges
        .into_iter()
        .zip(h.edges())
        .map(|(items, e)| Hyperedge::new(items, e.multiplicity()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Rewritten {
        hypergraph: Hypergraph::from_edges(weights, edges)?,
        origin,
        ledger,
    })
}

/// Partitions `H^r` into `n` parts and maps copies back to their items.
pub(crate) fn finish(h: &Hypergraph, rw: &Rewritten, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    let p = hpa_fit(&rw.hypergraph, n, c, sub_seed(seed, 1))?;
    let parts = p
        .partitions()
        .iter()
        .map(|part| part.iter().map(|&x| rw.origin[x]).collect())
        .collect();
    enforce_capacity(&Placement::new(c, parts), h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;
    use crate::oracle;

    #[test]
    fn hitting_set_distribution_fixture() {
        let sets = vec![
            vec![1, 4, 5, 6],
            vec![1, 3, 7, 8],
            vec![2, 9, 13, 17],
            vec![2, 18, 20, 22],
        ];
        let (s, assignment) = assign_copies(&sets).unwrap();
        assert_eq!(s, vec![1, 2]);
        assert_eq!(s.len(), oracle::exact_hitting_set(&sets).len());
        assert_eq!(assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn common_partition_means_one_copy() {
        let (s, assignment) = assign_copies(&[vec![3, 5], vec![1, 3], vec![3]]).unwrap();
        assert_eq!(s, vec![3]);
        assert_eq!(assignment, vec![0, 0, 0]);
    }

    #[test]
    fn score_counts_alone_in_partition() {
        // item 0 is alone in partition 0 for five queries, item 2 for two
        let q = vec![
            vec![0, 3],
            vec![0, 4],
            vec![0, 5],
            vec![0, 6],
            vec![0, 7],
            vec![2, 8],
            vec![2, 9],
            vec![2, 1],
            vec![1, 8],
        ];
        let h = build_hypergraph(&q, None).unwrap();
        let part_of = vec![0, 1, 2, 1, 1, 1, 1, 1, 1, 1];
        let score = scores(&h, &part_of);
        assert_eq!(score[0], 5);
        assert_eq!(score[2], 3);
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(score[v]), v));
        assert_eq!(order[0], 0);
        assert!(order.iter().position(|&v| v == 0) < order.iter().position(|&v| v == 2));
    }

    #[test]
    fn copies_split_queries_and_ledger_partitions_them() {
        // item 0 (partition 0) joins two queries in partition 1 and two in
        // partition 2; a second copy lets each pair become local
        let q = vec![vec![0, 1, 2], vec![0, 2, 3], vec![0, 4, 5], vec![0, 5, 6], vec![7, 8]];
        let h = build_hypergraph(&q, None).unwrap();
        let base = Placement::new(3, vec![vec![0, 7, 8], vec![1, 2, 3], vec![4, 5, 6]]);
        let rw = replicate(&h, &base, 3).unwrap();
        assert_eq!(rw.hypergraph.num_items(), 10);
        assert_eq!(rw.origin[9], 0);
        assert_eq!(rw.ledger.copies[0], vec![vec![0, 1], vec![2, 3]]);
        assert!(rw.ledger.partitions_incident_edges(&h));
        // no budget, no copies
        let rw = replicate(&h, &base, 0).unwrap();
        assert_eq!(rw.hypergraph.num_items(), 9);
    }

    #[test]
    fn full_run_is_feasible_and_deterministic() {
        let q: Vec<Vec<usize>> = (0..30).map(|i| vec![i % 12, (i * 5 + 1) % 12, (i * 7 + 3) % 12]).collect();
        let h = build_hypergraph(&q, None).unwrap();
        let (p, ledger) = pra_with_ledger(&h, 6, 3, 11).unwrap();
        p.check_coverage(&h).unwrap();
        p.check_capacity(&h).unwrap();
        assert!(ledger.partitions_incident_edges(&h));
        assert_eq!(p, pra(&h, 6, 3, 11).unwrap());
    }
}
