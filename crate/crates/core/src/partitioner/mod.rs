//! Balanced k-way partitioning without replication, and the capacity repair
//! pass applied to its output.

mod enforce;
mod multilevel;

use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, Weight};
use crate::placement::{PartId, Placement};

pub use enforce::enforce_capacity;

pub const DEFAULT_MIN_UBFACTOR: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub k: usize,
    pub capacity: Weight,
    /// Allowed imbalance in percent.
    pub ubfactor: f64,
    pub seed: u64,
    pub refinement_passes: usize,
}

impl PartitionConfig {
    pub fn new(k: usize, capacity: Weight, ubfactor: f64, seed: u64) -> Self {
        PartitionConfig {
            k,
            capacity,
            ubfactor,
            seed,
            refinement_passes: 8,
        }
    }

    /// Levels of bisection needed to reach `k` parts.
    fn depth(&self) -> i32 {
        (self.k.max(1) as f64).log2().ceil() as i32
    }

    /// Hard per-part weight bound. Each bisection may deviate by `ub` from
    /// an even split, so imbalance compounds over the levels needed to
    /// reach `k` parts; `C(1+ub)` caps the result. Never below what
    /// feasibility requires.
    pub fn max_part_weight(&self, total: Weight, max_item: Weight) -> Weight {
        let ub = self.ubfactor / 100.0;
        let by_capacity = self.capacity as f64 * (1.0 + ub);
        let by_total = total as f64 / self.k as f64 * (1.0 + 2.0 * ub).powi(self.depth());
        // tolerate rounding when the bound is exactly integral
        let bound = (by_capacity.min(by_total) + 1e-6).floor() as Weight;
        bound.max(total.div_ceil(self.k as Weight)).max(max_item)
    }

    /// Soft lower bound on part weight, mirroring [`Self::max_part_weight`]
    /// and loosened by one item so weighted instances stay satisfiable.
    pub fn min_part_weight(&self, total: Weight, max_item: Weight) -> Weight {
        let ub = self.ubfactor / 100.0;
        let shrink = (1.0 - 2.0 * ub).max(0.0).powi(self.depth());
        let bound = (total as f64 / self.k as f64 * shrink).floor() as Weight;
        bound.saturating_sub(max_item)
    }
}

/// Imbalance percentage leaving no headroom beyond `C` when `total` is split
/// into `k` parts, clamped below at [`DEFAULT_MIN_UBFACTOR`].
pub fn compute_ubfactor(capacity: Weight, k: usize, total: Weight) -> Result<f64> {
    compute_ubfactor_with_min(capacity, k, total, DEFAULT_MIN_UBFACTOR)
}

pub fn compute_ubfactor_with_min(capacity: Weight, k: usize, total: Weight, min: f64) -> Result<f64> {
    if total == 0 || k == 0 {
        return Err(Error::Invalid("ubfactor needs positive total weight and k".into()));
    }
    let room = capacity as u128 * k as u128;
    if room < total as u128 {
        return Err(Error::Infeasible(format!(
            "{k} partitions of capacity {capacity} cannot hold weight {total}"
        )));
    }
    let ub = 100.0 * (room - total as u128) as f64 / (total as f64 * k as f64);
    Ok(ub.max(min))
}

/// Multilevel partitioning into `config.k` disjoint parts minimizing the
/// connectivity of the hyperedges. Deterministic for a fixed seed.
pub fn hpa_partition(h: &Hypergraph, config: &PartitionConfig) -> Result<Placement> {
    let k = config.k;
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if !(config.ubfactor >= 0.0) {
        return Err(Error::Invalid(format!("ubfactor {} is negative", config.ubfactor)));
    }
    let total = h.total_item_weight();
    let max_item = h.max_item_weight();
    if max_item > config.capacity {
        return Err(Error::Infeasible(format!(
            "item of weight {max_item} exceeds capacity {}",
            config.capacity
        )));
    }
    if (config.capacity as u128) * (k as u128) < total as u128 {
        return Err(Error::Infeasible(format!(
            "{k} partitions of capacity {} cannot hold weight {total}",
            config.capacity
        )));
    }
    let cap = config.max_part_weight(total, max_item);
    let floor = config.min_part_weight(total, max_item);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let level = multilevel::Level::from_hypergraph(h);
    let parts = multilevel::partition(level, k, floor..=cap, config.refinement_passes.max(1), &mut rng)
        .ok_or_else(|| Error::Infeasible(format!("no {k}-way partition with part weight <= {cap}")))?;
    let assignment: Vec<PartId> = parts.into_iter().map(|p| p as PartId).collect();
    Ok(Placement::from_assignment(config.capacity, k, &assignment))
}

/// Reads a partition assignment (the `i`-th integer is the 0-based part of
/// vertex `i`, normally one per line) and validates it against `k` and
/// `capacity`.
pub fn import_external_partition<R: BufRead>(
    h: &Hypergraph,
    reader: R,
    k: usize,
    capacity: Weight,
) -> Result<Placement> {
    let mut assignment = Vec::with_capacity(h.num_items());
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        for tok in t.split_whitespace() {
            let p: PartId = tok
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad partition index `{tok}`")))?;
            if p >= k {
                return Err(Error::parse(i + 1, format!("partition index {p} not below k={k}")));
            }
            if assignment.len() == h.num_items() {
                return Err(Error::parse(i + 1, format!("more than {} vertices assigned", h.num_items())));
            }
            assignment.push(p);
        }
    }
    if assignment.len() < h.num_items() {
        return Err(Error::Invalid(format!("vertex {} unassigned", assignment.len())));
    }
    let p = Placement::from_assignment(capacity, k, &assignment);
    p.check_capacity(h)?;
    Ok(p)
}
