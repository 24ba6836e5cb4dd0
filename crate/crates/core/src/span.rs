//! Query span under a (possibly replicated) placement.
//!
//! With replication, the span of a query is a set-cover problem over the
//! partitions. Spans here are computed with the greedy cover: repeatedly take
//! the partition holding the most still-uncovered items of the query, lowest
//! partition id on ties. The same module hosts the combinatorial helpers the
//! placement algorithms share: span-based pruning, densest-node peeling and
//! the greedy hitting set.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{EdgeId, Hyperedge, Hypergraph, IdMap, ItemId, Weight};
use crate::placement::{PartId, Placement};

/// The partitions a query touches and the items it reads from each, in the
/// order the greedy cover picked them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub entries: Vec<(PartId, Vec<ItemId>)>,
}

impl Cover {
    pub fn span(&self) -> usize {
        self.entries.len()
    }

    pub fn partitions(&self) -> impl Iterator<Item = PartId> + '_ {
        self.entries.iter().map(|(p, _)| *p)
    }

    pub fn uses(&self, p: PartId) -> bool {
        self.entries.iter().any(|(q, _)| *q == p)
    }

    /// Items credited to `p`; empty when `p` is not part of the cover.
    pub fn accessed(&self, p: PartId) -> &[ItemId] {
        self.entries
            .iter()
            .find(|(q, _)| *q == p)
            .map_or(&[], |(_, items)| items.as_slice())
    }
}

/// One [`Cover`] per hyperedge.
pub type CoverAssignment = Vec<Cover>;

/// Greedy set cover of `items`, where `item_locs[i]` lists the partitions
/// holding `items[i]` (sorted).
pub(crate) fn greedy_cover(items: &[ItemId], item_locs: &[&[PartId]]) -> Result<Cover> {
    if let Some(i) = item_locs.iter().position(|l| l.is_empty()) {
        return Err(Error::UnplacedItem(items[i]));
    }
    let mut uncovered: Vec<usize> = (0..items.len()).collect();
    let mut entries = Vec::new();
    let mut scratch: Vec<PartId> = Vec::new();
    while !uncovered.is_empty() {
        scratch.clear();
        for &i in &uncovered {
            scratch.extend_from_slice(item_locs[i]);
        }
        scratch.sort_unstable();
        let (mut best, mut best_count) = (scratch[0], 0);
        let mut run = 0;
        for (j, &p) in scratch.iter().enumerate() {
            run += 1;
            if j + 1 == scratch.len() || scratch[j + 1] != p {
                // ascending scan: strict > keeps the lowest id on ties
                if run > best_count {
                    best = p;
                    best_count = run;
                }
                run = 0;
            }
        }
        let mut taken = Vec::with_capacity(best_count);
        uncovered.retain(|&i| {
            if item_locs[i].binary_search(&best).is_ok() {
                taken.push(items[i]);
                false
            } else {
                true
            }
        });
        entries.push((best, taken));
    }
    Ok(Cover { entries })
}

/// Item-to-partition index over a fixed placement, for evaluating many
/// queries against it.
#[derive(Clone, Debug)]
pub struct Locator {
    locs: Vec<Vec<PartId>>,
}

impl Locator {
    pub fn new(p: &Placement, num_items: usize) -> Self {
        Locator {
            locs: p.locations(num_items),
        }
    }

    pub fn from_locations(locs: Vec<Vec<PartId>>) -> Self {
        Locator { locs }
    }

    pub fn locations(&self, item: ItemId) -> &[PartId] {
        self.locs.get(item).map_or(&[], Vec::as_slice)
    }

    pub fn cover(&self, items: &[ItemId]) -> Result<Cover> {
        let locs: Vec<&[PartId]> = items.iter().map(|&v| self.locations(v)).collect();
        greedy_cover(items, &locs)
    }

    pub fn span(&self, items: &[ItemId]) -> Result<usize> {
        Ok(self.cover(items)?.span())
    }

    pub fn covers(&self, h: &Hypergraph) -> Result<CoverAssignment> {
        h.edges().iter().map(|e| self.cover(e.items())).collect()
    }

    pub fn spans(&self, h: &Hypergraph) -> Result<Vec<usize>> {
        h.edges()
            .par_iter()
            .map(|e| self.span(e.items()))
            .collect()
    }
}

fn edge_locations<'a>(p: &Placement, e: &Hyperedge, buf: &'a mut Vec<Vec<PartId>>) -> Vec<&'a [PartId]> {
    *buf = e
        .items()
        .iter()
        .map(|&v| {
            (0..p.num_partitions())
                .filter(|&g| p.contains(g, v))
                .collect()
        })
        .collect();
    buf.iter().map(Vec::as_slice).collect()
}

pub fn get_spanning_partitions(p: &Placement, e: &Hyperedge) -> Result<Cover> {
    let mut buf = Vec::new();
    let locs = edge_locations(p, e, &mut buf);
    greedy_cover(e.items(), &locs)
}

pub fn get_query_span(p: &Placement, e: &Hyperedge) -> Result<usize> {
    Ok(get_spanning_partitions(p, e)?.span())
}

pub fn get_accessed_items(p: &Placement, e: &Hyperedge, g: PartId) -> Result<Vec<ItemId>> {
    Ok(get_spanning_partitions(p, e)?.accessed(g).to_vec())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpan {
    pub edge: EdgeId,
    pub multiplicity: u64,
    pub span: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub millis: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanReport {
    pub spans: Vec<EdgeSpan>,
    pub average: Ratio<u64>,
    /// span -> number of queries (multiplicity-weighted)
    pub histogram: BTreeMap<usize, u64>,
    pub timings: Vec<PhaseTiming>,
}

#[derive(Serialize)]
struct SpanSummary<'a> {
    average: f64,
    average_exact: String,
    queries: u64,
    histogram: &'a BTreeMap<usize, u64>,
    timings: &'a [PhaseTiming],
}

impl SpanReport {
    pub fn from_spans(h: &Hypergraph, spans: &[usize]) -> Result<Self> {
        let total = h.total_multiplicity();
        if total == 0 {
            return Err(Error::NoQueries);
        }
        let mut histogram = BTreeMap::new();
        let mut weighted = 0u64;
        let spans: Vec<EdgeSpan> = h
            .edges()
            .iter()
            .zip(spans)
            .enumerate()
            .map(|(edge, (e, &span))| {
                weighted += e.multiplicity() * span as u64;
                *histogram.entry(span).or_insert(0) += e.multiplicity();
                EdgeSpan {
                    edge,
                    multiplicity: e.multiplicity(),
                    span,
                }
            })
            .collect();
        Ok(SpanReport {
            spans,
            average: Ratio::new(weighted, total),
            histogram,
            timings: Vec::new(),
        })
    }

    pub fn average_f64(&self) -> f64 {
        *self.average.numer() as f64 / *self.average.denom() as f64
    }

    pub fn query_count(&self) -> u64 {
        self.histogram.values().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.spans {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = SpanSummary {
            average: self.average_f64(),
            average_exact: format!("{}/{}", self.average.numer(), self.average.denom()),
            queries: self.query_count(),
            histogram: &self.histogram,
            timings: &self.timings,
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }
}

/// Multiplicity-weighted average greedy span over all queries.
pub fn average_span(p: &Placement, h: &Hypergraph) -> Result<SpanReport> {
    let spans = Locator::new(p, h.num_items()).spans(h)?;
    SpanReport::from_spans(h, &spans)
}

/// Drops every query with span `<= min_span` and then every item no
/// remaining query touches. Returns the residual and its id map.
pub fn prune_by_span(p: &Placement, h: &Hypergraph, min_span: usize) -> Result<(Hypergraph, IdMap)> {
    let spans = Locator::new(p, h.num_items()).spans(h)?;
    Ok(prune_by_spans(h, &spans, min_span))
}

pub(crate) fn prune_by_spans(h: &Hypergraph, spans: &[usize], min_span: usize) -> (Hypergraph, IdMap) {
    let keep: Vec<EdgeId> = (0..h.num_edges()).filter(|&e| spans[e] > min_span).collect();
    h.restrict_to_edges(&keep)
}

/// Min-degree peeling state. Degree counts surviving incident edges weighted
/// by multiplicity; removing a node kills every edge incident on it.
pub(crate) struct Peeler<'a> {
    h: &'a Hypergraph,
    degree: Vec<u64>,
    item_alive: Vec<bool>,
    edge_alive: Vec<bool>,
    queue: BTreeSet<(u64, ItemId)>,
    weight: Weight,
    live_edges: u64,
}

impl<'a> Peeler<'a> {
    pub(crate) fn new(h: &'a Hypergraph) -> Self {
        let degree: Vec<u64> = (0..h.num_items())
            .map(|v| h.incident(v).iter().map(|&e| h.edge(e).multiplicity()).sum())
            .collect();
        let queue = degree.iter().enumerate().map(|(v, &d)| (d, v)).collect();
        Peeler {
            h,
            degree,
            item_alive: vec![true; h.num_items()],
            edge_alive: vec![true; h.num_edges()],
            queue,
            weight: h.total_item_weight(),
            live_edges: h.total_multiplicity(),
        }
    }

    pub(crate) fn weight(&self) -> Weight {
        self.weight
    }

    /// Multiplicity-weighted count of edges with every endpoint alive.
    pub(crate) fn live_edges(&self) -> u64 {
        self.live_edges
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub(crate) fn survivors(&self) -> Vec<ItemId> {
        (0..self.h.num_items()).filter(|&v| self.item_alive[v]).collect()
    }

    /// Removes the lowest-degree node (lowest id on ties).
    pub(crate) fn peel(&mut self) -> Option<ItemId> {
        let (_, v) = self.queue.pop_first()?;
        self.item_alive[v] = false;
        self.weight -= self.h.weight(v);
        for &e in self.h.incident(v) {
            if !self.edge_alive[e] {
                continue;
            }
            self.edge_alive[e] = false;
            let m = self.h.edge(e).multiplicity();
            self.live_edges -= m;
            for &u in self.h.edge(e).items() {
                if u != v && self.item_alive[u] {
                    self.queue.remove(&(self.degree[u], u));
                    self.degree[u] -= m;
                    self.queue.insert((self.degree[u], u));
                }
            }
        }
        Some(v)
    }
}

/// Greedy densest subgraph under a weight budget: peel minimum-degree nodes
/// until the survivors weigh at most `budget`. An over-tight budget yields an
/// empty set.
pub fn k_densest_nodes(h: &Hypergraph, budget: Weight) -> Vec<ItemId> {
    let mut peeler = Peeler::new(h);
    while peeler.weight() > budget {
        peeler.peel();
    }
    peeler.survivors()
}

/// Sub-hypergraph induced by [`k_densest_nodes`].
pub fn prune_to_size(h: &Hypergraph, budget: Weight) -> (Hypergraph, IdMap) {
    h.induced(&k_densest_nodes(h, budget))
}

/// Greedy hitting set: repeatedly take the element common to the most
/// not-yet-hit sets (lowest id on ties). Elements are returned in pick order.
pub fn hitting_set(sets: &[Vec<PartId>]) -> Result<Vec<PartId>> {
    if let Some(i) = sets.iter().position(Vec::is_empty) {
        return Err(Error::Invalid(format!("set {i} is empty")));
    }
    let sets: Vec<Vec<PartId>> = sets
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let mut hit = vec![false; sets.len()];
    let mut remaining = sets.len();
    let mut picked = Vec::new();
    while remaining > 0 {
        let mut freq: BTreeMap<PartId, usize> = BTreeMap::new();
        for (s, set) in sets.iter().enumerate() {
            if !hit[s] {
                for &g in set {
                    *freq.entry(g).or_insert(0) += 1;
                }
            }
        }
        let mut best = (0, 0);
        for (&g, &c) in &freq {
            if c > best.1 {
                best = (g, c);
            }
        }
        let g = best.0;
        picked.push(g);
        for (s, set) in sets.iter().enumerate() {
            if !hit[s] && set.binary_search(&g).is_ok() {
                hit[s] = true;
                remaining -= 1;
            }
        }
    }
    Ok(picked)
}
