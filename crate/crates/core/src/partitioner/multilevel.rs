//! Multilevel k-way partitioning minimizing the connectivity metric
//! `sum_e m_e * (lambda_e - 1)`.
//!
//! Coarsening merges vertices along heavy hyperedges, the coarsest level is
//! split by greedy region growing, and every level is refined with k-way FM
//! passes (best-prefix rollback) under a hard per-part weight bound.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::hypergraph::{Hypergraph, Weight};

/// Edges larger than this are ignored when rating contractions and when
/// propagating gain updates; they still count in the objective.
const LARGE_EDGE: usize = 64;
const INITIAL_TRIES: usize = 6;

pub(crate) struct Level {
    weights: Vec<Weight>,
    pins: Vec<Vec<u32>>,
    mult: Vec<u64>,
    inc: Vec<Vec<u32>>,
}

impl Level {
    pub(crate) fn from_hypergraph(h: &Hypergraph) -> Level {
        let identity: Vec<u32> = (0..h.num_items() as u32).collect();
        let pins: Vec<Vec<u32>> = h
            .edges()
            .iter()
            .map(|e| e.items().iter().map(|&v| v as u32).collect())
            .collect();
        let mult: Vec<u64> = h.edges().iter().map(|e| e.multiplicity()).collect();
        build_level(h.weights().to_vec(), &pins, &mult, &identity)
    }

    fn n(&self) -> usize {
        self.weights.len()
    }

    fn total_weight(&self) -> Weight {
        self.weights.iter().sum()
    }

    fn contract(&self, cluster: &[u32], nc: usize) -> Level {
        let mut weights = vec![0; nc];
        for (v, &c) in cluster.iter().enumerate() {
            weights[c as usize] += self.weights[v];
        }
        build_level(weights, &self.pins, &self.mult, cluster)
    }
}

/// Maps pins through `map`, drops edges that collapse to a single vertex and
/// merges identical edges.
fn build_level(weights: Vec<Weight>, pins: &[Vec<u32>], mult: &[u64], map: &[u32]) -> Level {
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut new_pins: Vec<Vec<u32>> = Vec::new();
    let mut new_mult: Vec<u64> = Vec::new();
    for (e, p) in pins.iter().enumerate() {
        let mut q: Vec<u32> = p.iter().map(|&v| map[v as usize]).collect();
        q.sort_unstable();
        q.dedup();
        if q.len() < 2 {
            continue;
        }
        match index.get(&q) {
            Some(&i) => new_mult[i] += mult[e],
            None => {
                index.insert(q.clone(), new_pins.len());
                new_pins.push(q);
                new_mult.push(mult[e]);
            }
        }
    }
    let mut inc = vec![Vec::new(); weights.len()];
    for (e, p) in new_pins.iter().enumerate() {
        for &v in p {
            inc[v as usize].push(e as u32);
        }
    }
    Level {
        weights,
        pins: new_pins,
        mult: new_mult,
        inc,
    }
}

/// One round of first-choice clustering. Returns the vertex-to-cluster map
/// and cluster count, or `None` if the level barely shrinks.
fn cluster_once(lv: &Level, max_cluster: Weight, rng: &mut ChaCha8Rng) -> Option<(Vec<u32>, usize)> {
    let n = lv.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut cluster = vec![u32::MAX; n];
    let mut cluster_weight: Vec<Weight> = Vec::new();
    let mut score = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();
    for &v in &order {
        if cluster[v] != u32::MAX {
            continue;
        }
        for &e in &lv.inc[v] {
            let p = &lv.pins[e as usize];
            if p.len() > LARGE_EDGE {
                continue;
            }
            let r = lv.mult[e as usize] as f64 / (p.len() - 1) as f64;
            for &u in p {
                let u = u as usize;
                if u != v {
                    if score[u] == 0.0 {
                        touched.push(u);
                    }
                    score[u] += r;
                }
            }
        }
        let wv = lv.weights[v];
        let mut best: Option<(f64, usize)> = None;
        for &u in &touched {
            let wu = if cluster[u] == u32::MAX {
                lv.weights[u]
            } else {
                cluster_weight[cluster[u] as usize]
            };
            if wv + wu > max_cluster {
                continue;
            }
            let rating = score[u] / (wv as f64 * wu as f64);
            let better = match best {
                None => true,
                Some((r, b)) => rating > r || (rating == r && u < b),
            };
            if better {
                best = Some((rating, u));
            }
        }
        for &u in &touched {
            score[u] = 0.0;
        }
        touched.clear();
        match best {
            Some((_, u)) if cluster[u] != u32::MAX => {
                let c = cluster[u];
                cluster[v] = c;
                cluster_weight[c as usize] += wv;
            }
            Some((_, u)) => {
                let c = cluster_weight.len() as u32;
                cluster[v] = c;
                cluster[u] = c;
                cluster_weight.push(wv + lv.weights[u]);
            }
            None => {
                cluster[v] = cluster_weight.len() as u32;
                cluster_weight.push(wv);
            }
        }
    }
    let nc = cluster_weight.len();
    if nc as f64 > 0.92 * n as f64 {
        return None;
    }
    Some((cluster, nc))
}

/// Per-part pin counts and loads for one level, with the move primitives
/// used by refinement and rebalancing.
struct Refiner<'a> {
    lv: &'a Level,
    k: usize,
    min: Weight,
    cap: Weight,
    part: Vec<u32>,
    loads: Vec<Weight>,
    pin_count: Vec<u32>,
    conn: Vec<u64>,
    conn_touched: Vec<usize>,
}

impl<'a> Refiner<'a> {
    fn new(lv: &'a Level, k: usize, bounds: &RangeInclusive<Weight>, part: Vec<u32>) -> Self {
        let mut loads = vec![0; k];
        for (v, &p) in part.iter().enumerate() {
            loads[p as usize] += lv.weights[v];
        }
        let mut pin_count = vec![0u32; lv.pins.len() * k];
        for (e, p) in lv.pins.iter().enumerate() {
            for &v in p {
                pin_count[e * k + part[v as usize] as usize] += 1;
            }
        }
        Refiner {
            lv,
            k,
            min: *bounds.start(),
            cap: *bounds.end(),
            part,
            loads,
            pin_count,
            conn: vec![0; k],
            conn_touched: Vec::new(),
        }
    }

    fn cost(&self) -> u64 {
        (0..self.lv.pins.len())
            .map(|e| {
                let lambda = self.pin_count[e * self.k..(e + 1) * self.k]
                    .iter()
                    .filter(|&&c| c > 0)
                    .count() as u64;
                self.lv.mult[e] * lambda.saturating_sub(1)
            })
            .sum()
    }

    /// Best feasible move of `v` to a part sharing an edge with it.
    /// `any_part` also admits non-adjacent parts (for rebalancing).
    fn best_move(&mut self, v: usize, any_part: bool) -> Option<(i64, usize)> {
        let a = self.part[v] as usize;
        let w = self.lv.weights[v];
        if self.loads[a] < self.min + w {
            return None;
        }
        let mut base = 0i64;
        let mut deg = 0i64;
        for &e in &self.lv.inc[v] {
            let e = e as usize;
            let m = self.lv.mult[e];
            deg += m as i64;
            let row = &self.pin_count[e * self.k..(e + 1) * self.k];
            if row[a] == 1 {
                base += m as i64;
            }
            for (b, &c) in row.iter().enumerate() {
                if c > 0 && b != a {
                    if self.conn[b] == 0 {
                        self.conn_touched.push(b);
                    }
                    self.conn[b] += m;
                }
            }
        }
        let mut best: Option<(i64, usize)> = None;
        let consider = |b: usize, conn: u64, best: &mut Option<(i64, usize)>| {
            if b == a || self.loads[b] + w > self.cap {
                return;
            }
            let g = base - (deg - conn as i64);
            if best.is_none_or(|(bg, bb)| g > bg || (g == bg && b < bb)) {
                *best = Some((g, b));
            }
        };
        if any_part {
            for b in 0..self.k {
                consider(b, self.conn[b], &mut best);
            }
        } else {
            for &b in &self.conn_touched {
                consider(b, self.conn[b], &mut best);
            }
        }
        for &b in &self.conn_touched {
            self.conn[b] = 0;
        }
        self.conn_touched.clear();
        best
    }

    fn apply(&mut self, v: usize, b: usize) {
        let a = self.part[v] as usize;
        let w = self.lv.weights[v];
        self.loads[a] -= w;
        self.loads[b] += w;
        self.part[v] = b as u32;
        for &e in &self.lv.inc[v] {
            let e = e as usize;
            self.pin_count[e * self.k + a] -= 1;
            self.pin_count[e * self.k + b] += 1;
        }
    }

    fn is_boundary(&self, v: usize) -> bool {
        let a = self.part[v] as usize;
        self.lv.inc[v].iter().any(|&e| {
            let e = e as usize;
            (self.pin_count[e * self.k + a] as usize) < self.lv.pins[e].len()
        })
    }

    /// Connectivity gain of moving `v` into part `b`.
    fn gain_to(&self, v: usize, b: usize) -> i64 {
        let a = self.part[v] as usize;
        let mut g = 0i64;
        for &e in &self.lv.inc[v] {
            let e = e as usize;
            let m = self.lv.mult[e] as i64;
            if self.pin_count[e * self.k + a] == 1 {
                g += m;
            }
            if self.pin_count[e * self.k + b] == 0 {
                g -= m;
            }
        }
        g
    }

    /// Moves vertices out of overweight parts and into underweight ones,
    /// least damaging first. Returns whether every part now respects both
    /// bounds.
    fn rebalance(&mut self) -> bool {
        loop {
            let over = (0..self.k)
                .filter(|&p| self.loads[p] > self.cap)
                .max_by_key(|&p| (self.loads[p] - self.cap, Reverse(p)));
            let Some(src) = over else {
                return self.fill_underweight();
            };
            let mut best: Option<(i64, usize, usize)> = None;
            for v in 0..self.lv.n() {
                if self.part[v] as usize != src {
                    continue;
                }
                if let Some((g, b)) = self.best_move(v, true) {
                    if best.is_none_or(|(bg, bv, _)| g > bg || (g == bg && v < bv)) {
                        best = Some((g, v, b));
                    }
                }
            }
            match best {
                Some((_, v, b)) => self.apply(v, b),
                None => return false,
            }
        }
    }

    fn fill_underweight(&mut self) -> bool {
        loop {
            let under = (0..self.k)
                .filter(|&p| self.loads[p] < self.min)
                .max_by_key(|&p| (self.min - self.loads[p], Reverse(p)));
            let Some(dst) = under else { return true };
            let mut best: Option<(i64, usize)> = None;
            for v in 0..self.lv.n() {
                let a = self.part[v] as usize;
                let w = self.lv.weights[v];
                if a == dst || self.loads[a] < self.min + w || self.loads[dst] + w > self.cap {
                    continue;
                }
                let g = self.gain_to(v, dst);
                if best.is_none_or(|(bg, _)| g > bg) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((_, v)) => self.apply(v, dst),
                None => return false,
            }
        }
    }

    /// One FM pass; returns the connectivity improvement kept.
    fn fm_pass(&mut self) -> i64 {
        let n = self.lv.n();
        let mut locked = vec![false; n];
        let mut seen = vec![usize::MAX; n];
        // latest key pushed for each vertex; older heap entries are skipped
        let mut current = vec![i64::MIN; n];
        let mut heap: BinaryHeap<(i64, Reverse<u32>)> = BinaryHeap::new();
        for v in 0..n {
            if self.is_boundary(v) {
                if let Some((g, _)) = self.best_move(v, false) {
                    current[v] = g;
                    heap.push((g, Reverse(v as u32)));
                }
            }
        }
        let limit = (n / 4).clamp(20, 250);
        let mut moves: Vec<(usize, usize)> = Vec::new();
        let (mut cum, mut best_cum, mut best_len) = (0i64, 0i64, 0usize);
        while let Some((key, Reverse(v))) = heap.pop() {
            let v = v as usize;
            if locked[v] || key != current[v] {
                continue;
            }
            let Some((g, b)) = self.best_move(v, false) else {
                current[v] = i64::MIN;
                continue;
            };
            if g < key {
                current[v] = g;
                heap.push((g, Reverse(v as u32)));
                continue;
            }
            let a = self.part[v] as usize;
            self.apply(v, b);
            locked[v] = true;
            moves.push((v, a));
            cum += g;
            if cum > best_cum {
                best_cum = cum;
                best_len = moves.len();
            }
            if moves.len() - best_len > limit {
                break;
            }
            // each neighbour is rescored once per move
            seen[v] = moves.len();
            for &e in &self.lv.inc[v] {
                let e = e as usize;
                if self.lv.pins[e].len() > LARGE_EDGE {
                    continue;
                }
                for &u in &self.lv.pins[e] {
                    let u = u as usize;
                    if !locked[u] && seen[u] != moves.len() {
                        seen[u] = moves.len();
                        match self.best_move(u, false) {
                            Some((gu, _)) if gu != current[u] => {
                                current[u] = gu;
                                heap.push((gu, Reverse(u as u32)));
                            }
                            Some(_) => {}
                            None => current[u] = i64::MIN,
                        }
                    }
                }
            }
        }
        for &(v, a) in moves[best_len..].iter().rev() {
            self.apply(v, a);
        }
        best_cum
    }

    fn refine(&mut self, passes: usize) {
        for _ in 0..passes {
            if self.fm_pass() <= 0 {
                break;
            }
        }
    }
}

/// Greedy region growing: parts are filled one after another, each from a
/// random seed vertex, always absorbing the unassigned vertex most connected
/// to the growing part. The last part takes the remainder.
fn grow_initial(lv: &Level, k: usize, cap: Weight, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let n = lv.n();
    let mut part = vec![u32::MAX; n];
    let mut remaining = lv.total_weight();
    let mut unassigned: Vec<usize> = (0..n).collect();
    unassigned.shuffle(rng);
    let mut gain = vec![0u64; n];
    let mut edge_seen = vec![u32::MAX; lv.pins.len()];
    for p in 0..k {
        if p + 1 == k {
            for v in 0..n {
                if part[v] == u32::MAX {
                    part[v] = p as u32;
                }
            }
            break;
        }
        let target = remaining as f64 / (k - p) as f64;
        let mut load: Weight = 0;
        let mut heap: BinaryHeap<(u64, Reverse<usize>)> = BinaryHeap::new();
        gain.iter_mut().for_each(|g| *g = 0);
        loop {
            if (load as f64) >= target {
                break;
            }
            let next = loop {
                match heap.pop() {
                    Some((g, Reverse(v))) if part[v] == u32::MAX && g == gain[v] => break Some(v),
                    Some(_) => continue,
                    None => break None,
                }
            };
            let v = match next {
                Some(v) => v,
                None => {
                    unassigned.retain(|&u| part[u] == u32::MAX);
                    match unassigned.first() {
                        Some(&v) => v,
                        None => break,
                    }
                }
            };
            let w = lv.weights[v];
            if load + w > cap {
                // vertex does not fit here; leave it for a later part
                gain[v] = u64::MAX;
                if heap.is_empty() && unassigned.iter().all(|&u| part[u] != u32::MAX || gain[u] == u64::MAX) {
                    break;
                }
                unassigned.retain(|&u| u != v);
                unassigned.push(v);
                continue;
            }
            let over = (load + w) as f64 - target;
            if over > 0.0 && over > target - load as f64 && load > 0 {
                break;
            }
            part[v] = p as u32;
            load += w;
            for &e in &lv.inc[v] {
                let e = e as usize;
                if edge_seen[e] == p as u32 {
                    continue;
                }
                edge_seen[e] = p as u32;
                for &u in &lv.pins[e] {
                    let u = u as usize;
                    if part[u] == u32::MAX && gain[u] != u64::MAX {
                        gain[u] += lv.mult[e];
                        heap.push((gain[u], Reverse(u)));
                    }
                }
            }
        }
        for g in gain.iter_mut() {
            if *g == u64::MAX {
                *g = 0;
            }
        }
        remaining -= load;
    }
    part
}

/// Partitions `lv` into `k` parts whose weights lie in `bounds`. The upper
/// bound is hard and the lower one best effort. Returns the part of every
/// vertex, or `None` if the upper bound could not be met.
pub(crate) fn partition(
    lv: Level,
    k: usize,
    bounds: RangeInclusive<Weight>,
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<u32>> {
    let n = lv.n();
    let cap = *bounds.end();
    if k == 1 {
        return (lv.total_weight() <= cap).then(|| vec![0; n]);
    }
    let max_w = lv.weights.iter().copied().max().unwrap_or(0);
    let coarse_target = (12 * k).max(80);
    let max_cluster = max_w.max(cap / 4).max(1);

    let mut levels = vec![lv];
    let mut maps: Vec<Vec<u32>> = Vec::new();
    while levels.last().unwrap().n() > coarse_target {
        let top = levels.last().unwrap();
        match cluster_once(top, max_cluster, rng) {
            Some((map, nc)) => {
                let next = top.contract(&map, nc);
                maps.push(map);
                levels.push(next);
            }
            None => break,
        }
    }

    let coarsest = levels.last().unwrap();
    let mut best: Option<(bool, u64, Vec<u32>)> = None;
    for _ in 0..INITIAL_TRIES {
        let init = grow_initial(coarsest, k, cap, rng);
        let mut r = Refiner::new(coarsest, k, &bounds, init);
        let balanced = r.rebalance();
        r.refine(passes);
        let cost = r.cost();
        let better = match &best {
            None => true,
            Some((bb, bc, _)) => (balanced && !bb) || (balanced == *bb && cost < *bc),
        };
        if better {
            best = Some((balanced, cost, r.part));
        }
    }
    let mut part = best.unwrap().2;

    for depth in (0..maps.len()).rev() {
        let fine = &levels[depth];
        let projected: Vec<u32> = maps[depth].iter().map(|&c| part[c as usize]).collect();
        let mut r = Refiner::new(fine, k, &bounds, projected);
        r.rebalance();
        r.refine(passes);
        part = r.part;
    }
    let r = Refiner::new(&levels[0], k, &bounds, part);
    if r.loads.iter().any(|&l| l > cap) {
        return None;
    }
    Some(r.part)
}
