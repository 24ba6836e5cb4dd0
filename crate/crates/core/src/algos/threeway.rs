//! Variants that keep exactly three copies of every item.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{EdgeId, Hyperedge, Hypergraph, ItemId, Weight};
use crate::placement::{PartId, Placement, ReplicaLedger};
use crate::span::Locator;

use super::pra::{assign_copies, finish, spanning_without, Rewritten};
use super::{check_partitions, hpa_baseline, hpa_fit, sub_seed, trim_to_budget};

const COPIES: usize = 3;

fn check_room(h: &Hypergraph, n: usize, c: Weight) -> Result<()> {
    check_partitions(h, n, c)?;
    let need = COPIES as u128 * h.total_item_weight() as u128;
    if (n as u128) * (c as u128) < need {
        return Err(Error::Infeasible(format!(
            "{n} partitions of capacity {c} cannot hold three copies of weight {}",
            h.total_item_weight()
        )));
    }
    Ok(())
}

/// Hitting-set distribution of every item's queries over exactly three
/// copies, followed by HPA of the rewritten hypergraph into `N` parts.
pub fn pra_3way(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    check_room(h, n, c)?;
    let base = hpa_baseline(h, n, c, seed)?;
    let part_of: Vec<PartId> = base.locations(h.num_items()).iter().map(|l| l[0]).collect();
    let rw = rewrite(h, |v| {
        let multi: Vec<EdgeId> = h.incident(v).iter().copied().filter(|&e| h.edge(e).len() > 1).collect();
        let sets: Vec<Vec<PartId>> = multi.iter().map(|&e| spanning_without(h.edge(e), v, &part_of)).collect();
        let groups = three_groups(&sets)?;
        Ok(groups.into_iter().map(|g| g.into_iter().map(|i| multi[i]).collect()).collect())
    })?;
    let p = finish(h, &rw, n, c, seed)?;
    backfill(h, p, n, Fill::Affinity)
}

/// Each item's incident queries are shuffled and cut into three equal runs,
/// one per copy, then the rewritten hypergraph is partitioned into `N`.
pub fn sda_3way(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    check_room(h, n, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 3));
    let rw = rewrite(h, |v| {
        let mut edges = h.incident(v).to_vec();
        edges.shuffle(&mut rng);
        let len = edges.len();
        Ok((0..COPIES)
            .map(|i| {
                let mut chunk = edges[i * len / COPIES..(i + 1) * len / COPIES].to_vec();
                chunk.sort_unstable();
                chunk
            })
            .collect())
    })?;
    let p = finish(h, &rw, n, c, seed)?;
    backfill(h, p, n, Fill::Affinity)
}

/// HPA into `N_e`, then two residual rounds over the queries still spanning
/// several partitions, sharing the spare partitions between them. Items
/// still short of three copies go to the least-loaded partitions.
pub fn ihpa_3way(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    check_room(h, n, c)?;
    let mut g = hpa_baseline(h, n, c, seed)?;
    let rest = n - g.num_partitions();
    for (round, budget) in [rest / 2, rest - rest / 2].into_iter().enumerate() {
        if budget == 0 {
            continue;
        }
        let spans = Locator::new(&g, h.num_items()).spans(h)?;
        let residual: Vec<EdgeId> = (0..h.num_edges()).filter(|&e| spans[e] > 1).collect();
        let kept = trim_to_budget(h, &residual, &spans, budget as Weight * c);
        let before = g.num_partitions();
        if !kept.is_empty() {
            let (res, map) = h.restrict_to_edges(&kept);
            match hpa_fit(&res, budget, c, sub_seed(seed, round as u64 + 1)) {
                Ok(p) => g.extend_mapped(&p, &map),
                Err(Error::Infeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
        for _ in g.num_partitions()..before + budget {
            g.push_partition(Vec::new());
        }
    }
    backfill(h, g, n, Fill::LeastLoaded)
}

/// Copy groups for one item: the hitting-set distribution reconciled to
/// exactly three groups. Surplus groups merge into the kept group whose
/// spanning partitions overlap theirs most; missing groups come from
/// halving the largest group (an item with fewer than two queries in it
/// gets an idle copy). Entries index into `sets`.
pub(crate) fn three_groups(sets: &[Vec<PartId>]) -> Result<Vec<Vec<usize>>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    if !sets.is_empty() {
        let (s, assignment) = assign_copies(sets)?;
        groups = vec![Vec::new(); s.len()];
        for (i, &copy) in assignment.iter().enumerate() {
            groups[copy].push(i);
        }
    }
    let span_of = |group: &[usize]| {
        let mut u: Vec<PartId> = group.iter().flat_map(|&i| sets[i].iter().copied()).collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    let orphans = if groups.len() > COPIES { groups.split_off(COPIES) } else { Vec::new() };
    for orphan in orphans {
        let mine = span_of(&orphan);
        let target = (0..COPIES)
            .max_by_key(|&k| {
                let theirs = span_of(&groups[k]);
                let overlap = mine.iter().filter(|g| theirs.binary_search(g).is_ok()).count();
                (overlap, std::cmp::Reverse(k))
            })
            .expect("three kept groups");
        groups[target].extend(orphan);
        groups[target].sort_unstable();
    }
    while groups.len() < COPIES {
        let largest = (0..groups.len()).max_by_key(|&k| (groups[k].len(), std::cmp::Reverse(k)));
        match largest {
            Some(k) if groups[k].len() >= 2 => {
                let half = groups[k].len() / 2;
                let keep = groups[k].len() - half;
                let tail = groups[k].split_off(keep);
                groups.push(tail);
            }
            _ => groups.push(Vec::new()),
        }
    }
    Ok(groups)
}

/// Builds `H^r` from per-item copy groups. Group 0 keeps the original id;
/// singleton queries always stay with it.
fn rewrite(h: &Hypergraph, mut groups_of: impl FnMut(ItemId) -> Result<Vec<Vec<EdgeId>>>) -> Result<Rewritten> {
    let mut edges: Vec<Vec<ItemId>> = h.edges().iter().map(|e| e.items().to_vec()).collect();
    let mut weights = h.weights().to_vec();
    let mut origin: Vec<ItemId> = (0..h.num_items()).collect();
    let mut copies = Vec::with_capacity(h.num_items());
    for v in 0..h.num_items() {
        let mut groups = groups_of(v)?;
        let assigned: usize = groups.iter().map(Vec::len).sum();
        if assigned < h.incident(v).len() {
            groups[0].extend(h.incident(v).iter().copied().filter(|&e| h.edge(e).len() == 1));
            groups[0].sort_unstable();
        }
        for group in groups.iter().skip(1) {
            let id = weights.len();
            weights.push(h.weight(v));
            origin.push(v);
            for &e in group {
                let slot = edges[e].iter().position(|&u| u == v).expect("item in its edge");
                edges[e][slot] = id;
            }
        }
        copies.push(groups);
    }
    let edges = edges
        .into_iter()
        .zip(h.edges())
        .map(|(items, e)| Hyperedge::new(items, e.multiplicity()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Rewritten {
        hypergraph: Hypergraph::from_edges(weights, edges)?,
        origin,
        ledger: ReplicaLedger { copies },
    })
}

#[derive(Clone, Copy)]
enum Fill {
    /// partition sharing the most query items with the item
    Affinity,
    LeastLoaded,
}

/// Adds copies until every item has exactly three, into partitions with
/// room that do not hold the item yet. Ties go to the least-loaded
/// partition, then the lowest id.
fn backfill(h: &Hypergraph, p: Placement, n: usize, fill: Fill) -> Result<Placement> {
    let c = p.capacity();
    let mut parts = p.partitions().to_vec();
    parts.resize(n, Vec::new());
    let mut loads: Vec<Weight> = parts.iter().map(|q| q.iter().map(|&v| h.weight(v)).sum()).collect();
    let counts = Placement::new(c, parts.clone()).copy_counts(h.num_items());
    for v in 0..h.num_items() {
        if counts[v] > COPIES {
            return Err(Error::Invalid(format!("item {v} has {} copies", counts[v])));
        }
        for _ in counts[v]..COPIES {
            let w = h.weight(v);
            let affinity = |g: usize| -> u64 {
                match fill {
                    Fill::LeastLoaded => 0,
                    Fill::Affinity => h
                        .incident(v)
                        .iter()
                        .map(|&e| {
                            let edge = h.edge(e);
                            let shared = edge.items().iter().filter(|u| parts[g].binary_search(u).is_ok()).count();
                            edge.multiplicity() * shared as u64
                        })
                        .sum(),
                }
            };
            let best = (0..n)
                .filter(|&g| loads[g] + w <= c && parts[g].binary_search(&v).is_err())
                .max_by_key(|&g| (affinity(g), std::cmp::Reverse(loads[g]), std::cmp::Reverse(g)));
            let g = match best {
                Some(g) => g,
                None => make_room(h, &mut parts, &mut loads, c, v)
                    .ok_or_else(|| Error::Infeasible(format!("no partition has room for another copy of item {v}")))?,
            };
            let at = parts[g].binary_search(&v).unwrap_err();
            parts[g].insert(at, v);
            loads[g] += w;
        }
    }
    Ok(Placement::new(c, parts))
}

/// When the only free space sits in partitions already holding `v`, moves
/// one copy of another item `u` from a partition lacking `v` into that free
/// space. Returns the partition that can now take `v`. Lowest partition and
/// item ids win.
fn make_room(h: &Hypergraph, parts: &mut [Vec<ItemId>], loads: &mut [Weight], c: Weight, v: ItemId) -> Option<usize> {
    let w = h.weight(v);
    let n = parts.len();
    for q in (0..n).filter(|&q| parts[q].binary_search(&v).is_err()) {
        for &u in &parts[q] {
            let wu = h.weight(u);
            if loads[q] - wu + w > c {
                continue;
            }
            let dest = (0..n).find(|&d| d != q && loads[d] + wu <= c && parts[d].binary_search(&u).is_err());
            if let Some(d) = dest {
                parts[q].retain(|&x| x != u);
                loads[q] -= wu;
                let at = parts[d].binary_search(&u).unwrap_err();
                parts[d].insert(at, u);
                loads[d] += wu;
                return Some(q);
            }
        }
    }
    None
}
