//! Local move-based replication with maintained set covers.
//!
//! Every query keeps the partition set that serves it (its cover). A move
//! copies a group of items from `src` to `dest`; its gain is the number of
//! queries whose cover would drop `src` per unit of weight copied. Only
//! queries whose cover uses both partitions are considered, so a move never
//! counts a query that does not actually read from `src`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hypergraph::{EdgeId, Hyperedge, Hypergraph, ItemId, Weight};
use crate::partitioner::{compute_ubfactor, enforce_capacity, hpa_partition, PartitionConfig};
use crate::placement::{PartId, Placement};
use crate::span::{greedy_cover, Cover, Locator, Peeler};

use super::check_partitions;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCandidate {
    pub src: PartId,
    pub dest: PartId,
    pub items: Vec<ItemId>,
    /// Span decrease per unit of weight copied.
    pub gain: Ratio<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmbrStep {
    pub src: PartId,
    pub dest: PartId,
    pub items: Vec<ItemId>,
    pub gain: Ratio<u64>,
    /// Maintained `sum_e m_e * |cover_e|` before and after the move.
    pub total_before: u64,
    pub total_after: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmbrTrace {
    pub initial_total: u64,
    pub steps: Vec<LmbrStep>,
}

impl LmbrTrace {
    pub fn final_total(&self) -> u64 {
        self.steps.last().map_or(self.initial_total, |s| s.total_after)
    }

    /// Every move had positive gain and strictly lowered the maintained
    /// total, and consecutive steps chain.
    pub fn is_strictly_improving(&self) -> bool {
        let mut prev = self.initial_total;
        self.steps.iter().all(|s| {
            let ok = s.gain > Ratio::from_integer(0) && s.total_before == prev && s.total_after < s.total_before;
            prev = s.total_after;
            ok
        })
    }
}

pub fn lmbr(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    lmbr_traced(h, n, c, seed).map(|(p, _)| p)
}

/// LMBR starting from HPA into all `N` partitions, returning the executed
/// moves alongside the placement.
pub fn lmbr_traced(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<(Placement, LmbrTrace)> {
    check_partitions(h, n, c)?;
    let ub = compute_ubfactor(c, n, h.total_item_weight().max(1))?;
    let initial = hpa_partition(h, &PartitionConfig::new(n, c, ub, seed))?;
    let initial = enforce_capacity(&initial, h)?;
    lmbr_from(h, &initial)
}

/// Best copy move from `src` to `dest` under the given covers, or `None`
/// when no group of items yields a positive gain.
pub fn lmbr_max_gain(
    p: &Placement,
    h: &Hypergraph,
    covers: &[Cover],
    src: PartId,
    dest: PartId,
) -> Option<MoveCandidate> {
    State::with_covers(h, p, covers.to_vec()).max_gain(src, dest)
}

pub(crate) fn lmbr_from(h: &Hypergraph, initial: &Placement) -> Result<(Placement, LmbrTrace)> {
    let covers = Locator::new(initial, h.num_items()).covers(h)?;
    let mut state = State::with_covers(h, initial, covers);
    let n = initial.num_partitions();
    let mut trace = LmbrTrace {
        initial_total: state.total,
        steps: Vec::new(),
    };
    let mut version = vec![0u64; n * n];
    let mut queue: BinaryHeap<(Ratio<u64>, Reverse<PartId>, Reverse<PartId>, u64)> = BinaryHeap::new();
    let offer = |state: &State, queue: &mut BinaryHeap<_>, version: &mut Vec<u64>, s: PartId, d: PartId| {
        version[s * n + d] += 1;
        if let Some(m) = state.max_gain(s, d) {
            queue.push((m.gain, Reverse(s), Reverse(d), version[s * n + d]));
        }
    };
    let offer_all = |state: &State, queue: &mut BinaryHeap<_>, version: &mut Vec<u64>| {
        for s in 0..n {
            for d in 0..n {
                if s != d {
                    offer(state, queue, version, s, d);
                }
            }
        }
    };
    offer_all(&state, &mut queue, &mut version);
    let mut moved_since_sweep = false;
    loop {
        let Some((gain, Reverse(s), Reverse(d), v)) = queue.pop() else {
            // a move can reshape covers of pairs that were never re-offered,
            // so stop only once a full sweep finds nothing
            if !moved_since_sweep {
                break;
            }
            moved_since_sweep = false;
            offer_all(&state, &mut queue, &mut version);
            continue;
        };
        if v != version[s * n + d] {
            continue;
        }
        if state.loads.iter().all(|&l| l >= state.capacity) {
            break;
        }
        // rows not touching the last destination may be stale
        let Some(m) = state.max_gain(s, d) else {
            version[s * n + d] += 1;
            continue;
        };
        if m.gain != gain {
            offer(&state, &mut queue, &mut version, s, d);
            continue;
        }
        trace.steps.push(state.execute(&m));
        moved_since_sweep = true;
        for g in 0..n {
            if g != d {
                offer(&state, &mut queue, &mut version, g, d);
                offer(&state, &mut queue, &mut version, d, g);
            }
        }
    }
    Ok((state.placement(), trace))
}

struct State<'a> {
    h: &'a Hypergraph,
    capacity: Weight,
    locs: Vec<Vec<PartId>>,
    loads: Vec<Weight>,
    covers: Vec<Cover>,
    /// edges whose cover uses each partition
    part_edges: Vec<BTreeSet<EdgeId>>,
    total: u64,
}

impl<'a> State<'a> {
    fn with_covers(h: &'a Hypergraph, p: &Placement, covers: Vec<Cover>) -> Self {
        let mut part_edges = vec![BTreeSet::new(); p.num_partitions()];
        let mut total = 0;
        for (e, cover) in covers.iter().enumerate() {
            total += h.edge(e).multiplicity() * cover.span() as u64;
            for g in cover.partitions() {
                part_edges[g].insert(e);
            }
        }
        State {
            h,
            capacity: p.capacity(),
            locs: p.locations(h.num_items()),
            loads: p.loads(h),
            covers,
            part_edges,
            total,
        }
    }

    fn holds(&self, g: PartId, v: ItemId) -> bool {
        self.locs[v].binary_search(&g).is_ok()
    }

    fn max_gain(&self, src: PartId, dest: PartId) -> Option<MoveCandidate> {
        if src == dest {
            return None;
        }
        let free = self.capacity.saturating_sub(self.loads[dest]);
        if free == 0 {
            return None;
        }
        let (small, other) = if self.part_edges[src].len() <= self.part_edges[dest].len() {
            (src, dest)
        } else {
            (dest, src)
        };
        let mut local: HashMap<ItemId, usize> = HashMap::new();
        let mut items: Vec<ItemId> = Vec::new();
        let mut edges: Vec<Hyperedge> = Vec::new();
        for &e in &self.part_edges[small] {
            if !self.covers[e].uses(other) {
                continue;
            }
            let pins: Vec<usize> = self.covers[e]
                .accessed(src)
                .iter()
                .filter(|&&v| !self.holds(dest, v))
                .map(|&v| {
                    *local.entry(v).or_insert_with(|| {
                        items.push(v);
                        items.len() - 1
                    })
                })
                .collect();
            if !pins.is_empty() {
                edges.push(Hyperedge::new(pins, self.h.edge(e).multiplicity()).ok()?);
            }
        }
        if edges.is_empty() {
            return None;
        }
        let weights = items.iter().map(|&v| self.h.weight(v)).collect();
        let sub = Hypergraph::from_edges(weights, edges).ok()?;
        let mut peeler = Peeler::new(&sub);
        while peeler.weight() > free {
            peeler.peel();
        }
        let mut best: Option<(Ratio<u64>, Vec<usize>)> = None;
        while !peeler.is_empty() {
            if peeler.live_edges() > 0 {
                let g = Ratio::new(peeler.live_edges(), peeler.weight());
                if best.as_ref().is_none_or(|(b, _)| g > *b) {
                    best = Some((g, peeler.survivors()));
                }
            }
            peeler.peel();
        }
        let (gain, survivors) = best?;
        let mut chosen: Vec<ItemId> = survivors.into_iter().map(|i| items[i]).collect();
        chosen.sort_unstable();
        Some(MoveCandidate {
            src,
            dest,
            items: chosen,
            gain,
        })
    }

    fn execute(&mut self, m: &MoveCandidate) -> LmbrStep {
        let before = self.total;
        let mut affected: BTreeSet<EdgeId> = BTreeSet::new();
        for &v in &m.items {
            let at = self.locs[v].binary_search(&m.dest).unwrap_err();
            self.locs[v].insert(at, m.dest);
            self.loads[m.dest] += self.h.weight(v);
            affected.extend(self.h.incident(v));
        }
        for e in affected {
            let edge = self.h.edge(e);
            let old = &self.covers[e];
            let item_locs: Vec<&[PartId]> = edge.items().iter().map(|&v| self.locs[v].as_slice()).collect();
            let fresh = greedy_cover(edge.items(), &item_locs).expect("items stay placed");
            let kept = self.merged(old, m.src, m.dest).unwrap_or_else(|| old.clone());
            let new = if fresh.span() <= kept.span() { fresh } else { kept };
            for g in old.partitions() {
                self.part_edges[g].remove(&e);
            }
            for g in new.partitions() {
                self.part_edges[g].insert(e);
            }
            self.total = self.total - edge.multiplicity() * old.span() as u64 + edge.multiplicity() * new.span() as u64;
            self.covers[e] = new;
        }
        LmbrStep {
            src: m.src,
            dest: m.dest,
            items: m.items.clone(),
            gain: m.gain,
            total_before: before,
            total_after: self.total,
        }
    }

    /// `old` with `src` dropped and its items read from `dest` instead, when
    /// `dest` now holds all of them.
    fn merged(&self, old: &Cover, src: PartId, dest: PartId) -> Option<Cover> {
        if !old.uses(src) || !old.uses(dest) || !old.accessed(src).iter().all(|&v| self.holds(dest, v)) {
            return None;
        }
        let moved = old.accessed(src).to_vec();
        let entries = old
            .entries
            .iter()
            .filter(|(g, _)| *g != src)
            .map(|(g, items)| {
                let mut items = items.clone();
                if *g == dest {
                    items.extend_from_slice(&moved);
                    items.sort_unstable();
                }
                (*g, items)
            })
            .collect();
        Some(Cover { entries })
    }

    fn placement(&self) -> Placement {
        let mut parts = vec![Vec::new(); self.loads.len()];
        for (v, locs) in self.locs.iter().enumerate() {
            for &g in locs {
                parts[g].push(v);
            }
        }
        Placement::new(self.capacity, parts)
    }
}
