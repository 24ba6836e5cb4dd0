use crate::error::Result;
use crate::hypergraph::{Hypergraph, Weight};
use crate::placement::Placement;
use crate::span::{k_densest_nodes, prune_by_span};

use super::hpa_baseline;

/// Dense-subgraph replication: after the `N_e` baseline, each spare
/// partition receives the densest `C`-weight node set of the queries that
/// still span more than one partition.
///
/// Stops early when no query spans more than one partition, or when the
/// densest set would not make any residual query local (another copy of the
/// same set could not help either).
pub fn ds(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    ds_from(h, hpa_baseline(h, n, c, seed)?, n, c)
}

pub(crate) fn ds_from(h: &Hypergraph, mut g: Placement, n: usize, c: Weight) -> Result<Placement> {
    while g.num_partitions() < n {
        let (res, map) = prune_by_span(&g, h, 1)?;
        if res.num_edges() == 0 {
            break;
        }
        let dense = k_densest_nodes(&res, c);
        let (inside, _) = res.induced(&dense);
        if inside.num_edges() == 0 {
            break;
        }
        g.push_partition(dense.iter().map(|&v| map.to_parent(v)).collect());
    }
    Ok(g)
}
