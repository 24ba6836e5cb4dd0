//! Workload model: data items are weighted nodes, queries are hyperedges.
//!
//! A [`Hypergraph`] is immutable once built. Identical queries are collapsed
//! into one hyperedge with a multiplicity, and every average computed over
//! queries weights by that multiplicity.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 0-based data item identifier.
pub type ItemId = usize;
/// Dense 0-based hyperedge (query) identifier.
pub type EdgeId = usize;
/// Abstract storage units.
pub type Weight = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataItem {
    pub id: ItemId,
    pub weight: Weight,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyperedge {
    items: Vec<ItemId>,
    multiplicity: u64,
}

impl Hyperedge {
    /// Items are sorted and deduplicated. Fails on an empty item list or a
    /// zero multiplicity.
    pub fn new(mut items: Vec<ItemId>, multiplicity: u64) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Invalid("hyperedge has no items".into()));
        }
        if multiplicity == 0 {
            return Err(Error::Invalid("hyperedge multiplicity must be >= 1".into()));
        }
        items.sort_unstable();
        items.dedup();
        Ok(Hyperedge {
            items,
            multiplicity,
        })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn multiplicity(&self) -> u64 {
        self.multiplicity
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

/// Maps the dense ids of a derived hypergraph back to its parent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    to_parent: Vec<ItemId>,
}

impl IdMap {
    pub fn identity(n: usize) -> Self {
        IdMap {
            to_parent: (0..n).collect(),
        }
    }

    pub fn to_parent(&self, local: ItemId) -> ItemId {
        self.to_parent[local]
    }

    pub fn len(&self) -> usize {
        self.to_parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_parent.is_empty()
    }

    pub fn as_slice(&self) -> &[ItemId] {
        &self.to_parent
    }

    /// Composes `self` (child -> mid) with `parent` (mid -> root).
    pub fn then(&self, parent: &IdMap) -> IdMap {
        IdMap {
            to_parent: self.to_parent.iter().map(|&m| parent.to_parent(m)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    weights: Vec<Weight>,
    edges: Vec<Hyperedge>,
    incidence: Vec<Vec<EdgeId>>,
}

impl Hypergraph {
    /// Builds a hypergraph from already-formed edges without merging
    /// duplicates. Every referenced item must be below `weights.len()` and
    /// every weight must be at least 1.
    pub fn from_edges(weights: Vec<Weight>, edges: Vec<Hyperedge>) -> Result<Self> {
        if let Some(v) = weights.iter().position(|&w| w == 0) {
            return Err(Error::Invalid(format!("item {v} has zero weight")));
        }
        for (e, edge) in edges.iter().enumerate() {
            if let Some(&item) = edge.items.iter().find(|&&i| i >= weights.len()) {
                return Err(Error::DanglingItem { query: e, item });
            }
        }
        let incidence = build_incidence(weights.len(), &edges);
        Ok(Hypergraph {
            weights,
            edges,
            incidence,
        })
    }

    pub fn num_items(&self) -> usize {
        self.weights.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn weight(&self, item: ItemId) -> Weight {
        self.weights[item]
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn item(&self, id: ItemId) -> DataItem {
        DataItem {
            id,
            weight: self.weights[id],
        }
    }

    pub fn items(&self) -> impl Iterator<Item = DataItem> + '_ {
        (0..self.num_items()).map(|id| self.item(id))
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Hyperedge {
        &self.edges[e]
    }

    pub fn incident(&self, item: ItemId) -> &[EdgeId] {
        &self.incidence[item]
    }

    pub fn total_item_weight(&self) -> Weight {
        self.weights.iter().sum()
    }

    pub fn max_item_weight(&self) -> Weight {
        self.weights.iter().copied().max().unwrap_or(0)
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity).sum()
    }

    pub fn has_unit_weights(&self) -> bool {
        self.weights.iter().all(|&w| w == 1)
    }

    /// Rebuilds the incidence index from the edge list and compares it with
    /// the stored one.
    pub fn incidence_consistent(&self) -> bool {
        build_incidence(self.weights.len(), &self.edges) == self.incidence
    }

    /// Keeps the listed edges and drops items that no kept edge touches.
    pub fn restrict_to_edges(&self, keep: &[EdgeId]) -> (Hypergraph, IdMap) {
        let mut local = vec![usize::MAX; self.num_items()];
        let mut to_parent = Vec::new();
        let mut edges = Vec::with_capacity(keep.len());
        for &e in keep {
            let edge = &self.edges[e];
            let items = edge
                .items
                .iter()
                .map(|&v| {
                    if local[v] == usize::MAX {
                        local[v] = to_parent.len();
                        to_parent.push(v);
                    }
                    local[v]
                })
                .collect();
            edges.push(Hyperedge::new(items, edge.multiplicity).expect("non-empty edge"));
        }
        let weights = to_parent.iter().map(|&v| self.weights[v]).collect();
        let h = Hypergraph::from_edges(weights, edges).expect("restriction stays valid");
        (h, IdMap { to_parent })
    }

    /// Sub-hypergraph induced by `items`: only edges entirely inside the set
    /// survive. Every listed item is kept, even when isolated.
    pub fn induced(&self, items: &[ItemId]) -> (Hypergraph, IdMap) {
        let mut local = vec![usize::MAX; self.num_items()];
        let mut to_parent: Vec<ItemId> = items.to_vec();
        to_parent.sort_unstable();
        to_parent.dedup();
        for (i, &v) in to_parent.iter().enumerate() {
            local[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| e.items.iter().all(|&v| local[v] != usize::MAX))
            .map(|e| Hyperedge {
                items: e.items.iter().map(|&v| local[v]).collect(),
                multiplicity: e.multiplicity,
            })
            .collect();
        let weights = to_parent.iter().map(|&v| self.weights[v]).collect();
        let h = Hypergraph::from_edges(weights, edges).expect("induced stays valid");
        (h, IdMap { to_parent })
    }
}

fn build_incidence(n: usize, edges: &[Hyperedge]) -> Vec<Vec<EdgeId>> {
    let mut incidence = vec![Vec::new(); n];
    for (e, edge) in edges.iter().enumerate() {
        for &v in &edge.items {
            incidence[v].push(e);
        }
    }
    incidence
}

/// Builds a hypergraph from raw query item sets, merging identical queries
/// into one edge with summed multiplicity.
///
/// The item count is the length of `weights` when given, otherwise one past
/// the largest referenced id (unit weights).
pub fn build_hypergraph(queries: &[Vec<ItemId>], weights: Option<&[Weight]>) -> Result<Hypergraph> {
    let n = match weights {
        Some(w) => w.len(),
        None => queries
            .iter()
            .flat_map(|q| q.iter().copied())
            .max()
            .map_or(0, |m| m + 1),
    };
    build_hypergraph_with_items(n, queries, weights)
}

/// Like [`build_hypergraph`] with an explicit item count, so items that no
/// query touches still exist.
pub fn build_hypergraph_with_items(
    item_count: usize,
    queries: &[Vec<ItemId>],
    weights: Option<&[Weight]>,
) -> Result<Hypergraph> {
    let weights = match weights {
        Some(w) if w.len() != item_count => {
            return Err(Error::Invalid(format!(
                "weight list has {} entries for {item_count} items",
                w.len()
            )))
        }
        Some(w) => w.to_vec(),
        None => vec![1; item_count],
    };
    let mut index: HashMap<Vec<ItemId>, usize> = HashMap::new();
    let mut edges: Vec<Hyperedge> = Vec::new();
    for (q, query) in queries.iter().enumerate() {
        if query.is_empty() {
            return Err(Error::EmptyQuery { index: q });
        }
        if let Some(&item) = query.iter().find(|&&i| i >= item_count) {
            return Err(Error::DanglingItem { query: q, item });
        }
        let mut items = query.clone();
        items.sort_unstable();
        items.dedup();
        match index.get(&items) {
            Some(&e) => edges[e].multiplicity += 1,
            None => {
                index.insert(items.clone(), edges.len());
                edges.push(Hyperedge {
                    items,
                    multiplicity: 1,
                });
            }
        }
    }
    Hypergraph::from_edges(weights, edges)
}

/// Multiplicity-weighted mean query size.
pub fn avg_items_per_query(h: &Hypergraph) -> Result<Ratio<u64>> {
    let total = h.total_multiplicity();
    if total == 0 {
        return Err(Error::NoQueries);
    }
    let pins: u64 = h
        .edges()
        .iter()
        .map(|e| e.multiplicity() * e.len() as u64)
        .sum();
    Ok(Ratio::new(pins, total))
}

pub fn total_weight(items: &[ItemId], h: &Hypergraph) -> Result<Weight> {
    items.iter().try_fold(0, |acc, &v| {
        if v < h.num_items() {
            Ok(acc + h.weight(v))
        } else {
            Err(Error::UnknownItem(v))
        }
    })
}

/// Weight lower bound on the number of capacity-`capacity` partitions
/// needed to hold every item once: `ceil(totalWeight / C)`.
pub fn min_partitions_needed(h: &Hypergraph, capacity: Weight) -> Result<usize> {
    check_capacity(h, capacity)?;
    Ok(h.total_item_weight().div_ceil(capacity) as usize)
}

/// Number of partitions a first-fit-decreasing packing uses. This is a
/// feasible count, so it brackets the true minimum together with
/// [`min_partitions_needed`].
pub fn packed_partitions_needed(h: &Hypergraph, capacity: Weight) -> Result<usize> {
    check_capacity(h, capacity)?;
    Ok(first_fit_decreasing(h.weights(), capacity).len())
}

/// First-fit-decreasing bin packing of `weights`; returns the bins as item
/// lists. Ties in weight are ordered by id.
pub(crate) fn first_fit_decreasing(weights: &[Weight], capacity: Weight) -> Vec<Vec<ItemId>> {
    let mut order: Vec<ItemId> = (0..weights.len()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(weights[v]), v));
    let mut bins: Vec<(Weight, Vec<ItemId>)> = Vec::new();
    for v in order {
        match bins.iter_mut().find(|(load, _)| load + weights[v] <= capacity) {
            Some((load, items)) => {
                *load += weights[v];
                items.push(v);
            }
            None => bins.push((weights[v], vec![v])),
        }
    }
    bins.into_iter().map(|(_, items)| items).collect()
}

fn check_capacity(h: &Hypergraph, capacity: Weight) -> Result<()> {
    let max = h.max_item_weight();
    if capacity == 0 || capacity < max {
        return Err(Error::Infeasible(format!(
            "capacity {capacity} is smaller than the largest item ({max})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_queries_merge() {
        let h = build_hypergraph(&[vec![0, 1], vec![1, 2], vec![1, 0]], None).unwrap();
        assert_eq!(h.num_items(), 3);
        assert_eq!(h.num_edges(), 2);
        assert_eq!(h.edge(0).items(), &[0, 1]);
        assert_eq!(h.edge(0).multiplicity(), 2);
        assert!(h.incidence_consistent());
    }

    #[test]
    fn minimal_instance() {
        let h = build_hypergraph(&[vec![0]], None).unwrap();
        assert_eq!((h.num_items(), h.num_edges()), (1, 1));
        assert_eq!(h.edge(0).len(), 1);
    }

    #[test]
    fn eight_items_six_queries() {
        let q = vec![
            vec![0, 1, 2],
            vec![2, 3, 4],
            vec![4, 5],
            vec![5, 6, 7],
            vec![0, 7],
            vec![1, 3, 6],
        ];
        let h = build_hypergraph(&q, None).unwrap();
        assert_eq!((h.num_items(), h.num_edges()), (8, 6));
    }

    #[test]
    fn rejects_empty_and_dangling() {
        assert!(matches!(
            build_hypergraph(&[vec![0], vec![]], None),
            Err(Error::EmptyQuery { index: 1 })
        ));
        assert!(matches!(
            build_hypergraph(&[vec![0, 5]], Some(&[1, 1])),
            Err(Error::DanglingItem { query: 0, item: 5 })
        ));
        assert!(build_hypergraph(&[vec![0]], Some(&[0])).is_err());
    }

    #[test]
    fn average_query_size() {
        let h = build_hypergraph(&[vec![0, 1], vec![1, 2, 3]], None).unwrap();
        assert_eq!(avg_items_per_query(&h).unwrap(), Ratio::new(5, 2));
        let h = build_hypergraph(&[vec![0, 1], vec![0, 1], vec![0, 1]], None).unwrap();
        assert_eq!(avg_items_per_query(&h).unwrap(), Ratio::from_integer(2));
        let empty = build_hypergraph_with_items(3, &[], None).unwrap();
        assert!(matches!(avg_items_per_query(&empty), Err(Error::NoQueries)));
    }

    #[test]
    fn weight_sums() {
        let h = build_hypergraph(&[vec![0, 1, 2]], None).unwrap();
        assert_eq!(total_weight(&[], &h).unwrap(), 0);
        assert_eq!(total_weight(&[0, 1], &h).unwrap(), 2);
        assert!(matches!(total_weight(&[9], &h), Err(Error::UnknownItem(9))));
    }

    #[test]
    fn partition_lower_bounds() {
        let h = build_hypergraph_with_items(1000, &[vec![0]], None).unwrap();
        assert_eq!(min_partitions_needed(&h, 50).unwrap(), 20);
        let h = build_hypergraph(&[vec![0]], None).unwrap();
        assert_eq!(min_partitions_needed(&h, 10).unwrap(), 1);
        let h = build_hypergraph(&[vec![0, 1, 2]], Some(&[30, 30, 30])).unwrap();
        assert_eq!(min_partitions_needed(&h, 50).unwrap(), 2);
        assert_eq!(packed_partitions_needed(&h, 50).unwrap(), 3);
        assert!(min_partitions_needed(&h, 20).is_err());
    }

    #[test]
    fn induced_and_restricted() {
        let h = build_hypergraph(&[vec![0, 1], vec![1, 2], vec![2, 3]], None).unwrap();
        let (sub, map) = h.induced(&[1, 2, 3]);
        assert_eq!(sub.num_items(), 3);
        assert_eq!(sub.num_edges(), 2);
        assert_eq!(map.as_slice(), &[1, 2, 3]);
        let (r, map) = h.restrict_to_edges(&[2]);
        assert_eq!(r.num_items(), 2);
        assert_eq!(map.as_slice(), &[2, 3]);
    }
}
