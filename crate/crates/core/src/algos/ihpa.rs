use crate::error::{Error, Result};
use crate::hypergraph::{avg_items_per_query, EdgeId, Hypergraph, Weight};
use crate::placement::Placement;
use crate::span::Locator;

use super::{hpa_baseline, hpa_fit_range, sub_seed, trim_to_budget};

/// Iterative HPA: starting from the `N_e` baseline, repeatedly partitions
/// the residual of queries whose span exceeds `edgeCost` onto fresh
/// partitions, lowering `edgeCost` whenever the residual is empty.
pub fn ihpa(h: &Hypergraph, n: usize, c: Weight, seed: u64) -> Result<Placement> {
    let mut g = hpa_baseline(h, n, c, seed)?;
    if h.num_edges() == 0 {
        return Ok(g);
    }
    let mut edge_cost = avg_items_per_query(h)?.to_integer() as usize;
    let mut round = 1u64;
    while edge_cost > 0 && g.num_partitions() < n {
        let avail = n - g.num_partitions();
        let spans = Locator::new(&g, h.num_items()).spans(h)?;
        let residual: Vec<EdgeId> = (0..h.num_edges()).filter(|&e| spans[e] > edge_cost).collect();
        if residual.is_empty() {
            edge_cost -= 1;
            continue;
        }
        let (res, map) = h.restrict_to_edges(&residual);
        let n_cur = res.total_item_weight().div_ceil(c) as usize;
        let placed = if n_cur <= avail {
            hpa_fit_range(&res, n_cur, avail, c, sub_seed(seed, round)).map(|p| (p, res, map))
        } else {
            let kept = trim_to_budget(h, &residual, &spans, avail as Weight * c);
            if kept.is_empty() {
                edge_cost -= 1;
                continue;
            }
            let (res, map) = h.restrict_to_edges(&kept);
            hpa_fit_range(&res, avail, avail, c, sub_seed(seed, round)).map(|p| (p, res, map))
        };
        round += 1;
        match placed {
            Ok((p, _, map)) => g.extend_mapped(&p, &map),
            // weighted residual that cannot be packed into what is left
            Err(Error::Infeasible(_)) => edge_cost -= 1,
            Err(e) => return Err(e),
        }
    }
    Ok(g)
}
