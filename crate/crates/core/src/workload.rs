//! Synthetic workloads: random connected queries over a random data item
//! graph, snowflake schemas, and TPC-H-sized columns.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgr::{write_benchmark_hypergraph, write_weights};
use crate::hypergraph::{build_hypergraph_with_items, Hypergraph, ItemId, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Random,
    Snowflake,
    Tpch,
}

/// Shape of a snowflake schema. Tables form stars of `levels` levels where
/// every table joins with up to `degree` child tables; when the item count
/// needs more tables than one star holds, further stars are chained through
/// their fact tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnowflakeShape {
    pub levels: usize,
    pub degree: usize,
    pub attrs_per_table: usize,
}

impl Default for SnowflakeShape {
    fn default() -> Self {
        SnowflakeShape { levels: 3, degree: 5, attrs_per_table: 15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub item_count: usize,
    pub query_count: usize,
    pub min_query_size: usize,
    pub max_query_size: usize,
    /// Edges per node of the random data item graph.
    pub density: f64,
    pub snowflake: SnowflakeShape,
    pub tpch_scale: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            kind: WorkloadKind::Random,
            item_count: 1000,
            query_count: 4000,
            min_query_size: 3,
            max_query_size: 11,
            density: 20.0,
            snowflake: SnowflakeShape::default(),
            tpch_scale: 25.0,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    /// Parses JSON, or `key = value` text in TOML syntax.
    pub fn parse(text: &str) -> Result<Self> {
        let spec: WorkloadSpec = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text).map_err(|e| Error::Invalid(format!("workload spec: {e}")))?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::Invalid(m));
        if self.item_count == 0 {
            return invalid("item_count must be positive".into());
        }
        if self.min_query_size == 0 || self.min_query_size > self.max_query_size {
            return invalid(format!(
                "query sizes must satisfy 1 <= min <= max, got {}..{}",
                self.min_query_size, self.max_query_size
            ));
        }
        if self.max_query_size > self.item_count {
            return invalid(format!(
                "max_query_size {} exceeds item_count {}",
                self.max_query_size, self.item_count
            ));
        }
        match self.kind {
            WorkloadKind::Random => {
                if !self.density.is_finite() || self.density < 0.0 {
                    return invalid(format!("density must be a non-negative number, got {}", self.density));
                }
            }
            WorkloadKind::Snowflake | WorkloadKind::Tpch => {
                let s = &self.snowflake;
                if s.levels == 0 || s.attrs_per_table == 0 {
                    return invalid("snowflake levels and attrs_per_table must be positive".into());
                }
                if self.kind == WorkloadKind::Tpch && !(self.tpch_scale.is_finite() && self.tpch_scale > 0.0) {
                    return invalid(format!("tpch_scale must be positive, got {}", self.tpch_scale));
                }
            }
        }
        Ok(())
    }

    fn query_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }
}

/// Undirected simple graph over data items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataItemGraph {
    weights: Vec<Weight>,
    adj: Vec<Vec<ItemId>>,
    num_edges: usize,
}

impl DataItemGraph {
    pub fn from_edges(weights: Vec<Weight>, edges: &[(ItemId, ItemId)]) -> Result<Self> {
        let n = weights.len();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::UnknownItem(u.max(v)));
            }
            if u == v {
                return Err(Error::Invalid(format!("self-loop on item {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invalid(format!("repeated edge at item {u}")));
            }
        }
        Ok(DataItemGraph { weights, adj, num_edges: edges.len() })
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn neighbors(&self, v: ItemId) -> &[ItemId] {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: ItemId, v: ItemId) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in order.
    pub fn edges(&self) -> impl Iterator<Item = (ItemId, ItemId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn is_connected(&self) -> bool {
        self.component_of(0, |_| true).len() == self.num_nodes()
    }

    /// Whether `items` induce a connected subgraph.
    pub fn induces_connected(&self, items: &[ItemId]) -> bool {
        if items.is_empty() {
            return true;
        }
        let inside: HashSet<ItemId> = items.iter().copied().collect();
        self.component_of(items[0], |v| inside.contains(&v)).len() == inside.len()
    }

    fn component_of(&self, start: ItemId, allowed: impl Fn(ItemId) -> bool) -> Vec<ItemId> {
        if self.num_nodes() == 0 {
            return Vec::new();
        }
        let mut seen = vec![false; self.num_nodes()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(v) = stack.pop() {
            out.push(v);
            for &u in &self.adj[v] {
                if !seen[u] && allowed(u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        out
    }
}

/// Random connected item graph with `floor(density * |D|)` edges: a random
/// spanning tree, then extra edges uniformly without replacement.
pub fn gen_item_graph(spec: &WorkloadSpec) -> Result<DataItemGraph> {
    let n = spec.item_count;
    let target = (spec.density * n as f64).floor() as usize;
    let complete = n * (n - 1) / 2;
    if target > complete {
        return Err(Error::Infeasible(format!(
            "density {} needs {target} edges but {n} items allow at most {complete}",
            spec.density
        )));
    }
    if target + 1 < n {
        return Err(Error::Invalid(format!(
            "density {} gives {target} edges, too few to connect {n} items",
            spec.density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut order: Vec<ItemId> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut present: HashSet<(ItemId, ItemId)> = HashSet::with_capacity(target);
    let key = |u: ItemId, v: ItemId| (u.min(v), u.max(v));
    let mut edges = Vec::with_capacity(target);
    for i in 1..n {
        let e = key(order[i], order[rng.gen_range(0..i)]);
        present.insert(e);
        edges.push(e);
    }

    let extra = target - edges.len();
    let free = complete - edges.len();
    if extra * 2 > free {
        let candidates: Vec<(ItemId, ItemId)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|e| !present.contains(e))
            .collect();
        let mut picked = index::sample(&mut rng, candidates.len(), extra).into_vec();
        picked.sort_unstable();
        edges.extend(picked.into_iter().map(|i| candidates[i]));
    } else {
        while edges.len() < target {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v && present.insert(key(u, v)) {
                edges.push(key(u, v));
            }
        }
    }
    DataItemGraph::from_edges(vec![1; n], &edges)
}

/// `spec.query_count` queries, each a connected subgraph of `g` of a size
/// drawn uniformly from the spec's range, grown from a uniform start node by
/// adding a uniform node of the frontier. All queries come from one stream,
/// so a smaller query count yields a prefix of a larger one.
pub fn gen_random_queries(g: &DataItemGraph, spec: &WorkloadSpec) -> Result<Hypergraph> {
    let queries = random_query_sets(g, spec)?;
    build_hypergraph_with_items(g.num_nodes(), &queries, Some(g.weights()))
}

/// The raw query item sets behind [`gen_random_queries`], in draw order.
pub fn random_query_sets(g: &DataItemGraph, spec: &WorkloadSpec) -> Result<Vec<Vec<ItemId>>> {
    let n = g.num_nodes();
    if spec.max_query_size > n {
        return Err(Error::Invalid(format!("query size {} exceeds {n} items", spec.max_query_size)));
    }
    if spec.min_query_size == 0 || spec.min_query_size > spec.max_query_size {
        return Err(Error::Invalid("query sizes must satisfy 1 <= min <= max".into()));
    }
    if !g.is_connected() {
        return Err(Error::Invalid("item graph is not connected".into()));
    }
    let mut rng = spec.query_rng();
    let mut mark = vec![u32::MAX; n];
    let mut queries = Vec::with_capacity(spec.query_count);
    for q in 0..spec.query_count {
        let size = rng.gen_range(spec.min_query_size..=spec.max_query_size);
        let epoch = q as u32;
        let start = rng.gen_range(0..n);
        mark[start] = epoch;
        let mut items = vec![start];
        let mut frontier: Vec<ItemId> = Vec::new();
        let mut push_neighbors = |v: ItemId, frontier: &mut Vec<ItemId>| {
            for &u in g.neighbors(v) {
                if mark[u] != epoch {
                    mark[u] = epoch;
                    frontier.push(u);
                }
            }
        };
        push_neighbors(start, &mut frontier);
        while items.len() < size {
            let v = frontier.swap_remove(rng.gen_range(0..frontier.len()));
            items.push(v);
            push_neighbors(v, &mut frontier);
        }
        items.sort_unstable();
        queries.push(items);
    }
    Ok(queries)
}

/// Table layout behind a snowflake item graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnowflakeSchema {
    /// table holding each item; the first item of a table is its key
    pub table_of: Vec<usize>,
    /// joined parent table, `None` for the root fact table
    pub parent: Vec<Option<usize>>,
    /// position of each table within its star, 0 for fact tables
    pub slot: Vec<usize>,
}

impl SnowflakeSchema {
    pub fn new(item_count: usize, shape: &SnowflakeShape) -> Result<Self> {
        if shape.levels == 0 || shape.attrs_per_table == 0 || item_count == 0 {
            return Err(Error::Invalid("snowflake needs positive levels, attrs_per_table and items".into()));
        }
        let tables = item_count.div_ceil(shape.attrs_per_table);
        let mut star = 0usize;
        let mut level = 1usize;
        for _ in 0..shape.levels {
            star = star.saturating_add(level);
            level = level.saturating_mul(shape.degree);
        }
        let mut parent = Vec::with_capacity(tables);
        let mut slot = Vec::with_capacity(tables);
        for t in 0..tables {
            let (s, j) = (t / star, t % star);
            slot.push(j);
            parent.push(match (s, j) {
                (0, 0) => None,
                (_, 0) => Some((s - 1) * star),
                _ => Some(s * star + (j - 1) / shape.degree),
            });
        }
        let table_of = (0..item_count).map(|i| i / shape.attrs_per_table).collect();
        Ok(SnowflakeSchema { table_of, parent, slot })
    }

    pub fn num_tables(&self) -> usize {
        self.parent.len()
    }

    /// Attributes of a table hang off its key; keys join to the parent key.
    pub fn item_graph(&self, weights: Vec<Weight>) -> Result<DataItemGraph> {
        let mut key = vec![usize::MAX; self.num_tables()];
        let mut edges = Vec::with_capacity(self.table_of.len());
        for (i, &t) in self.table_of.iter().enumerate() {
            if key[t] == usize::MAX {
                key[t] = i;
            } else {
                edges.push((key[t], i));
            }
        }
        for (t, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                edges.push((key[p], key[t]));
            }
        }
        DataItemGraph::from_edges(weights, &edges)
    }

    /// Whether the tables touched by `items` form a connected subtree.
    pub fn tables_connected(&self, items: &[ItemId]) -> bool {
        let mut tables: Vec<usize> = items.iter().map(|&i| self.table_of[i]).collect();
        tables.sort_unstable();
        tables.dedup();
        // in a tree, a vertex set is connected iff exactly one member has
        // its parent outside the set
        let roots = tables
            .iter()
            .filter(|&&t| self.parent[t].is_none_or(|p| tables.binary_search(&p).is_err()))
            .count();
        roots == 1
    }
}

/// Snowflake workload: a tree-shaped item graph from [`SnowflakeSchema`]
/// and random connected queries over it, so every query's tables form a
/// join chain without Cartesian products.
pub fn gen_snowflake(spec: &WorkloadSpec) -> Result<(DataItemGraph, Hypergraph)> {
    let schema = SnowflakeSchema::new(spec.item_count, &spec.snowflake)?;
    let g = schema.item_graph(vec![1; spec.item_count])?;
    let h = gen_random_queries(&g, spec)?;
    Ok((g, h))
}

/// `(table, rows at scale factor 1, columns as (name, bytes))`.
///
/// Row counts follow the TPC-H dbgen cardinalities at scale factor 1.
/// Byte widths follow the benchmark's datatype definitions: identifiers,
/// integers and dates take 4 bytes, decimals 8, and fixed or variable text
/// its declared length.
pub const TPCH_SCHEMA: &[(&str, u64, &[(&str, u64)])] = &[
    (
        "lineitem",
        6_001_215,
        &[
            ("l_orderkey", 4),
            ("l_partkey", 4),
            ("l_suppkey", 4),
            ("l_linenumber", 4),
            ("l_quantity", 8),
            ("l_extendedprice", 8),
            ("l_discount", 8),
            ("l_tax", 8),
            ("l_returnflag", 1),
            ("l_linestatus", 1),
            ("l_shipdate", 4),
            ("l_commitdate", 4),
            ("l_receiptdate", 4),
            ("l_shipinstruct", 25),
            ("l_shipmode", 10),
            ("l_comment", 44),
        ],
    ),
    (
        "orders",
        1_500_000,
        &[
            ("o_orderkey", 4),
            ("o_custkey", 4),
            ("o_orderstatus", 1),
            ("o_totalprice", 8),
            ("o_orderdate", 4),
            ("o_orderpriority", 15),
            ("o_clerk", 15),
            ("o_shippriority", 4),
            ("o_comment", 79),
        ],
    ),
    (
        "partsupp",
        800_000,
        &[
            ("ps_partkey", 4),
            ("ps_suppkey", 4),
            ("ps_availqty", 4),
            ("ps_supplycost", 8),
            ("ps_comment", 199),
        ],
    ),
    (
        "part",
        200_000,
        &[
            ("p_partkey", 4),
            ("p_name", 55),
            ("p_mfgr", 25),
            ("p_brand", 10),
            ("p_type", 25),
            ("p_size", 4),
            ("p_container", 10),
            ("p_retailprice", 8),
            ("p_comment", 23),
        ],
    ),
    (
        "customer",
        150_000,
        &[
            ("c_custkey", 4),
            ("c_name", 25),
            ("c_address", 40),
            ("c_nationkey", 4),
            ("c_phone", 15),
            ("c_acctbal", 8),
            ("c_mktsegment", 10),
            ("c_comment", 117),
        ],
    ),
    (
        "supplier",
        10_000,
        &[
            ("s_suppkey", 4),
            ("s_name", 25),
            ("s_address", 40),
            ("s_nationkey", 4),
            ("s_phone", 15),
            ("s_acctbal", 8),
            ("s_comment", 101),
        ],
    ),
    (
        "nation",
        25,
        &[("n_nationkey", 4), ("n_name", 25), ("n_regionkey", 4), ("n_comment", 152)],
    ),
    ("region", 5, &[("r_regionkey", 4), ("r_name", 25), ("r_comment", 152)]),
];

/// Default partition capacity for TPC-H workloads, 100GB in bytes.
pub const TPCH_DEFAULT_CAPACITY: Weight = 100_000_000_000;

/// Column sizes in bytes, `width * rows * scale`, in [`TPCH_SCHEMA`] order.
/// Every table's row count scales linearly.
pub fn gen_tpch_weights(scale: f64) -> Result<Vec<Weight>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Invalid(format!("scale factor must be positive, got {scale}")));
    }
    Ok(TPCH_SCHEMA
        .iter()
        .flat_map(|&(_, rows, cols)| {
            cols.iter()
                .map(move |&(_, width)| ((width * rows) as f64 * scale).round().max(1.0) as Weight)
        })
        .collect())
}

/// Snowflake-shaped workload whose items carry TPC-H column sizes: table
/// slot `j` of each star takes relation `j mod 8` (fact tables are
/// lineitem) and its `a`-th attribute that relation's column `a` modulo
/// its width.
pub fn gen_tpch(spec: &WorkloadSpec) -> Result<(DataItemGraph, Hypergraph)> {
    let schema = SnowflakeSchema::new(spec.item_count, &spec.snowflake)?;
    let columns = gen_tpch_weights(spec.tpch_scale)?;
    let mut offsets = Vec::with_capacity(TPCH_SCHEMA.len());
    let mut at = 0;
    for &(_, _, cols) in TPCH_SCHEMA {
        offsets.push((at, cols.len()));
        at += cols.len();
    }
    let mut first = vec![usize::MAX; schema.num_tables()];
    let weights = (0..spec.item_count)
        .map(|i| {
            let t = schema.table_of[i];
            if first[t] == usize::MAX {
                first[t] = i;
            }
            let (off, len) = offsets[schema.slot[t] % TPCH_SCHEMA.len()];
            columns[off + (i - first[t]) % len]
        })
        .collect();
    let g = schema.item_graph(weights)?;
    let h = gen_random_queries(&g, spec)?;
    Ok((g, h))
}

/// A generated workload with its item graph.
#[derive(Clone, Debug)]
pub struct Workload {
    pub spec: WorkloadSpec,
    pub graph: DataItemGraph,
    pub hypergraph: Hypergraph,
}

impl Workload {
    pub fn generate(spec: &WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let (graph, hypergraph) = match spec.kind {
            WorkloadKind::Random => {
                let g = gen_item_graph(spec)?;
                let h = gen_random_queries(&g, spec)?;
                (g, h)
            }
            WorkloadKind::Snowflake => gen_snowflake(spec)?,
            WorkloadKind::Tpch => gen_tpch(spec)?,
        };
        Ok(Workload { spec: spec.clone(), graph, hypergraph })
    }

    /// Writes `<stem>.hgr` and the `<stem>.weights` sidecar into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut hgr = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.hgr")))?);
        write_benchmark_hypergraph(&self.hypergraph, &mut hgr)?;
        hgr.flush()?;
        let mut weights = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.weights")))?);
        write_weights(self.hypergraph.weights(), &mut weights)?;
        weights.flush()?;
        Ok(())
    }
}
