//! Assignment of item copies to capacity-bounded partitions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, IdMap, ItemId, Weight};

pub type PartId = usize;

/// `partitions[p]` is the sorted, duplicate-free item set of partition `p`.
/// Partitions may overlap when items are replicated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    capacity: Weight,
    partitions: Vec<Vec<ItemId>>,
}

impl Placement {
    pub fn new(capacity: Weight, partitions: Vec<Vec<ItemId>>) -> Self {
        let partitions = partitions
            .into_iter()
            .map(|mut p| {
                p.sort_unstable();
                p.dedup();
                p
            })
            .collect();
        Placement {
            capacity,
            partitions,
        }
    }

    /// Disjoint placement from a per-item partition index.
    pub fn from_assignment(capacity: Weight, k: usize, assignment: &[PartId]) -> Self {
        let mut partitions = vec![Vec::new(); k];
        for (v, &p) in assignment.iter().enumerate() {
            partitions[p].push(v);
        }
        Placement {
            capacity,
            partitions,
        }
    }

    pub fn capacity(&self) -> Weight {
        self.capacity
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Vec<ItemId>] {
        &self.partitions
    }

    pub fn partition(&self, p: PartId) -> &[ItemId] {
        &self.partitions[p]
    }

    pub fn contains(&self, p: PartId, item: ItemId) -> bool {
        self.partitions[p].binary_search(&item).is_ok()
    }

    /// Appends partitions given in the local ids of a derived hypergraph.
    pub fn extend_mapped(&mut self, parts: &Placement, map: &IdMap) {
        for part in parts.partitions() {
            let mut items: Vec<ItemId> = part.iter().map(|&v| map.to_parent(v)).collect();
            items.sort_unstable();
            self.partitions.push(items);
        }
    }

    pub fn push_partition(&mut self, mut items: Vec<ItemId>) {
        items.sort_unstable();
        items.dedup();
        self.partitions.push(items);
    }

    pub fn loads(&self, h: &Hypergraph) -> Vec<Weight> {
        self.partitions
            .iter()
            .map(|p| p.iter().map(|&v| h.weight(v)).sum())
            .collect()
    }

    pub fn max_load(&self, h: &Hypergraph) -> Weight {
        self.loads(h).into_iter().max().unwrap_or(0)
    }

    /// For each of `num_items` items, the sorted partitions holding a copy.
    pub fn locations(&self, num_items: usize) -> Vec<Vec<PartId>> {
        let mut locs = vec![Vec::new(); num_items];
        for (p, part) in self.partitions.iter().enumerate() {
            for &v in part {
                if v < num_items {
                    locs[v].push(p);
                }
            }
        }
        locs
    }

    pub fn copy_counts(&self, num_items: usize) -> Vec<usize> {
        let mut counts = vec![0; num_items];
        for part in &self.partitions {
            for &v in part {
                if v < num_items {
                    counts[v] += 1;
                }
            }
        }
        counts
    }

    /// Copies beyond the first of each item.
    pub fn replicas(&self, num_items: usize) -> usize {
        let copies: usize = self.partitions.iter().map(Vec::len).sum();
        copies.saturating_sub(num_items)
    }

    /// Every item of `h` placed at least once, no foreign ids.
    pub fn check_coverage(&self, h: &Hypergraph) -> Result<()> {
        let counts = self.copy_counts(h.num_items());
        if let Some(v) = counts.iter().position(|&c| c == 0) {
            return Err(Error::UnplacedItem(v));
        }
        for part in &self.partitions {
            if let Some(&v) = part.iter().find(|&&v| v >= h.num_items()) {
                return Err(Error::UnknownItem(v));
            }
        }
        Ok(())
    }

    pub fn check_capacity(&self, h: &Hypergraph) -> Result<()> {
        for (p, load) in self.loads(h).into_iter().enumerate() {
            if load > self.capacity {
                return Err(Error::Infeasible(format!(
                    "partition {p} holds weight {load} over capacity {}",
                    self.capacity
                )));
            }
        }
        Ok(())
    }

    pub fn is_disjoint(&self, num_items: usize) -> bool {
        self.copy_counts(num_items).iter().all(|&c| c <= 1)
    }

    /// Flat text form: one `item partition` pair per line.
    pub fn write_pairs<W: Write>(&self, mut w: W) -> Result<()> {
        for (p, part) in self.partitions.iter().enumerate() {
            for &v in part {
                writeln!(w, "{v} {p}")?;
            }
        }
        Ok(())
    }

    pub fn read_pairs<R: BufRead>(reader: R, capacity: Weight) -> Result<Placement> {
        let mut partitions: Vec<Vec<ItemId>> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let nums: Vec<usize> = t
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::parse(i + 1, format!("bad token `{s}`"))))
                .collect::<Result<_>>()?;
            let [v, p] = nums[..] else {
                return Err(Error::parse(i + 1, "expected `item partition`"));
            };
            if partitions.len() <= p {
                partitions.resize(p + 1, Vec::new());
            }
            partitions[p].push(v);
        }
        Ok(Placement::new(capacity, partitions))
    }
}

/// Per original item, the hyperedges served by each of its copies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaLedger {
    pub copies: Vec<Vec<Vec<usize>>>,
}

impl ReplicaLedger {
    /// Checks that, for every item, the copies' edge sets partition its
    /// incident edge set.
    pub fn partitions_incident_edges(&self, h: &Hypergraph) -> bool {
        if self.copies.len() != h.num_items() {
            return false;
        }
        (0..h.num_items()).all(|v| {
            let mut all: Vec<usize> = self.copies[v].iter().flatten().copied().collect();
            all.sort_unstable();
            let n = all.len();
            all.dedup();
            n == all.len() && all == h.incident(v)
        })
    }
}

/// JSON placement file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlacementFile {
    pub capacity: Weight,
    pub partitions: Vec<Vec<ItemId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<ReplicaLedger>,
}

impl PlacementFile {
    pub fn new(p: &Placement, ledger: Option<&ReplicaLedger>) -> Self {
        PlacementFile {
            capacity: p.capacity(),
            partitions: p.partitions().to_vec(),
            ledger: ledger.cloned(),
        }
    }

    pub fn into_placement(self) -> Placement {
        Placement::new(self.capacity, self.partitions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;

    #[test]
    fn locations_and_replicas() {
        let p = Placement::new(3, vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(p.partition(0), &[0, 2]);
        assert_eq!(p.locations(3), vec![vec![0, 1], vec![1], vec![0]]);
        assert_eq!(p.replicas(3), 1);
        assert!(!p.is_disjoint(3));
    }

    #[test]
    fn coverage_and_capacity() {
        let h = build_hypergraph(&[vec![0, 1, 2]], None).unwrap();
        let p = Placement::new(2, vec![vec![0, 1]]);
        assert!(matches!(p.check_coverage(&h), Err(Error::UnplacedItem(2))));
        let p = Placement::new(2, vec![vec![0, 1, 2]]);
        assert!(p.check_capacity(&h).is_err());
    }

    #[test]
    fn pair_format_round_trip() {
        let p = Placement::new(4, vec![vec![0, 1], vec![1, 2]]);
        let mut buf = Vec::new();
        p.write_pairs(&mut buf).unwrap();
        assert_eq!(Placement::read_pairs(&buf[..], 4).unwrap(), p);
    }
}
