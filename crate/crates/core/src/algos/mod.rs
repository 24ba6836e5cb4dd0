//! Replicated placement algorithms.
//!
//! Every algorithm is a pure function of `(H, N, C, seed)` and returns a
//! placement in which every item appears at least once and no partition
//! exceeds `C`.

mod ds;
mod ihpa;
mod lmbr;
mod pra;
mod random;
mod threeway;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{min_partitions_needed, EdgeId, Hypergraph, Weight};
use crate::partitioner::{compute_ubfactor, enforce_capacity, hpa_partition, PartitionConfig};
use crate::placement::{Placement, ReplicaLedger};
use crate::span::PhaseTiming;

pub use ds::ds;
pub use ihpa::ihpa;
pub use lmbr::{lmbr, lmbr_max_gain, lmbr_traced, LmbrStep, LmbrTrace, MoveCandidate};
pub use pra::{pra, pra_with_ledger};
pub use random::random_placement;
pub use threeway::{ihpa_3way, pra_3way, sda_3way};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hpa,
    Random,
    Ihpa,
    Ds,
    Pra,
    Lmbr,
    #[serde(rename = "pra_3way")]
    Pra3Way,
    #[serde(rename = "sda_3way")]
    Sda3Way,
    #[serde(rename = "ihpa_3way")]
    Ihpa3Way,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Hpa,
        Algorithm::Random,
        Algorithm::Ihpa,
        Algorithm::Ds,
        Algorithm::Pra,
        Algorithm::Lmbr,
        Algorithm::Pra3Way,
        Algorithm::Sda3Way,
        Algorithm::Ihpa3Way,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hpa => "hpa",
            Algorithm::Random => "random",
            Algorithm::Ihpa => "ihpa",
            Algorithm::Ds => "ds",
            Algorithm::Pra => "pra",
            Algorithm::Lmbr => "lmbr",
            Algorithm::Pra3Way => "pra_3way",
            Algorithm::Sda3Way => "sda_3way",
            Algorithm::Ihpa3Way => "ihpa_3way",
        }
    }

    pub fn is_three_way(self) -> bool {
        matches!(self, Algorithm::Pra3Way | Algorithm::Sda3Way | Algorithm::Ihpa3Way)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct PlacementOutcome {
    pub placement: Placement,
    pub ledger: Option<ReplicaLedger>,
    pub trace: Option<LmbrTrace>,
    pub timings: Vec<PhaseTiming>,
}

/// Runs `algo` and records its wall-clock time.
pub fn run_algorithm(algo: Algorithm, h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<PlacementOutcome> {
    let start = Instant::now();
    let (placement, ledger, trace) = match algo {
        Algorithm::Hpa => (hpa_baseline(h, n, c, seed)?, None, None),
        Algorithm::Random => (random_placement(h, n, c, seed)?, None, None),
        Algorithm::Ihpa => (ihpa(h, n, c, seed)?, None, None),
        Algorithm::Ds => (ds(h, n, c, seed)?, None, None),
        Algorithm::Pra => {
            let (p, l) = pra_with_ledger(h, n, c, seed)?;
            (p, Some(l), None)
        }
        Algorithm::Lmbr => {
            let (p, t) = lmbr_traced(h, n, c, seed)?;
            (p, None, Some(t))
        }
        Algorithm::Pra3Way => (pra_3way(h, n, c, seed)?, None, None),
        Algorithm::Sda3Way => (sda_3way(h, n, c, seed)?, None, None),
        Algorithm::Ihpa3Way => (ihpa_3way(h, n, c, seed)?, None, None),
    };
    let timings = vec![PhaseTiming {
        phase: algo.name().to_string(),
        millis: start.elapsed().as_secs_f64() * 1e3,
    }];
    Ok(PlacementOutcome {
        placement,
        ledger,
        trace,
        timings,
    })
}

/// Decorrelated seed for the `i`-th internal partitioner call.
pub(crate) fn sub_seed(seed: u64, i: u64) -> u64 {
    seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// HPA into exactly `k` parts with the widest imbalance that still fits
/// `C`, followed by capacity repair.
pub(crate) fn hpa_fit(h: &Hypergraph, k: usize, c: Weight, seed: u64) -> Result<Placement> {
    let ub = compute_ubfactor(c, k, h.total_item_weight().max(1))?;
    let p = hpa_partition(h, &PartitionConfig::new(k, c, ub, seed))?;
    enforce_capacity(&p, h)
}

/// [`hpa_fit`] with the smallest `k` in `lo..=hi` that succeeds. Weighted
/// items can make the weight bound unpackable, in which case one more part
/// is tried.
pub(crate) fn hpa_fit_range(h: &Hypergraph, lo: usize, hi: usize, c: Weight, seed: u64) -> Result<Placement> {
    let mut last = Error::Infeasible(format!("no partition count in {lo}..={hi} fits"));
    for k in lo.max(1)..=hi {
        match hpa_fit(h, k, c, seed) {
            Ok(p) => return Ok(p),
            Err(e @ Error::Infeasible(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Fails unless `n >= N_e`.
pub(crate) fn check_partitions(h: &Hypergraph, n: usize, c: Weight) -> Result<usize> {
    let ne = min_partitions_needed(h, c)?;
    if n < ne {
        return Err(Error::Infeasible(format!(
            "{n} partitions of capacity {c} cannot hold weight {} (need {ne})",
            h.total_item_weight()
        )));
    }
    Ok(ne)
}

/// The disjoint starting layout shared by the replication algorithms: HPA
/// into `N_e` parts (more only if weighted packing forces it), capacity
/// enforced.
pub fn hpa_baseline(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    let ne = check_partitions(h, n, c)?;
    hpa_fit_range(h, ne, n, c, seed)
}

/// The edges with the highest spans that fit `budget`: edges are dropped in
/// increasing span order (lowest id first) together with items no longer
/// touched, until the remaining items weigh at most `budget`.
pub(crate) fn trim_to_budget(h: &Hypergraph, candidates: &[EdgeId], spans: &[usize], budget: Weight) -> Vec<EdgeId> {
    let mut touch = vec![0u32; h.num_items()];
    let mut weight: Weight = 0;
    for &e in candidates {
        for &v in h.edge(e).items() {
            if touch[v] == 0 {
                weight += h.weight(v);
            }
            touch[v] += 1;
        }
    }
    let mut order = candidates.to_vec();
    order.sort_by_key(|&e| (spans[e], e));
    let mut dropped = 0;
    while weight > budget && dropped < order.len() {
        for &v in h.edge(order[dropped]).items() {
            touch[v] -= 1;
            if touch[v] == 0 {
                weight -= h.weight(v);
            }
        }
        dropped += 1;
    }
    let mut kept = order[dropped..].to_vec();
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::build_hypergraph;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }

    #[test]
    fn trimming_drops_low_span_edges_first() {
        let h = build_hypergraph(&[vec![0, 1], vec![2, 3], vec![4, 5]], None).unwrap();
        let spans = vec![2, 3, 2];
        assert_eq!(trim_to_budget(&h, &[0, 1, 2], &spans, 4), vec![1, 2]);
        assert_eq!(trim_to_budget(&h, &[0, 1, 2], &spans, 2), vec![1]);
        assert!(trim_to_budget(&h, &[0, 1, 2], &spans, 1).is_empty());
    }

    #[test]
    fn baseline_rejects_too_few_partitions() {
        let h = build_hypergraph(&[vec![0, 1, 2, 3]], None).unwrap();
        assert!(matches!(hpa_baseline(&h, 1, 3, 0), Err(Error::Infeasible(_))));
        let p = hpa_baseline(&h, 3, 3, 0).unwrap();
        assert_eq!(p.num_partitions(), 2);
    }
}
