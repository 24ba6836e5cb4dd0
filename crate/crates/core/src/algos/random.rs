use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, ItemId, Weight};
use crate::placement::Placement;

use super::check_partitions;

/// Places every item once uniformly among partitions with room (heaviest
/// items first), then fills each partition's leftover space with uniformly
/// chosen replicas of items it does not already hold.
pub fn random_placement(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    check_partitions(h, n, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<Vec<ItemId>> = vec![Vec::new(); n];
    let mut loads: Vec<Weight> = vec![0; n];
    let mut order: Vec<ItemId> = (0..h.num_items()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(h.weight(v)), v));
    for v in order {
        let w = h.weight(v);
        let room: Vec<usize> = (0..n).filter(|&g| loads[g] + w <= c).collect();
        if room.is_empty() {
            return Err(Error::Infeasible(format!("no partition has room for item {v}")));
        }
        let g = room[rng.gen_range(0..room.len())];
        parts[g].push(v);
        loads[g] += w;
    }
    for g in 0..n {
        parts[g].sort_unstable();
        // walking a random permutation and taking whatever still fits picks
        // each replica uniformly among the items that fit at that moment
        let mut candidates: Vec<ItemId> = (0..h.num_items())
            .filter(|v| parts[g].binary_search(v).is_err())
            .collect();
        candidates.shuffle(&mut rng);
        for v in candidates {
            if loads[g] == c {
                break;
            }
            if loads[g] + h.weight(v) <= c {
                parts[g].push(v);
                loads[g] += h.weight(v);
            }
        }
    }
    Ok(Placement::new(c, parts))
}
