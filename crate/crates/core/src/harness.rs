//! Experiment driver: sweeps a workload or benchmark parameter, runs every
//! algorithm over several seeds and records one row per run.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algos::{run_algorithm, Algorithm};
use crate::error::{Error, Result};
use crate::hgr::{parse_benchmark_hypergraph, parse_weights};
use crate::hypergraph::{Hypergraph, Weight};
use crate::placement::{Placement, PlacementFile};
use crate::span::{average_span, SpanReport};
use crate::workload::{Workload, WorkloadSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SPANLAYOUT_OUT";

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const ERRORS_CSV: &str = "errors.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// number of partitions `N`
    Partitions,
    /// fixed query size: min and max both set to the value
    QuerySize,
    QueryCount,
    Density,
    /// one cell per benchmark file in `inputs`
    File,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Partitions => "partitions",
            SweepAxis::QuerySize => "query_size",
            SweepAxis::QueryCount => "query_count",
            SweepAxis::Density => "density",
            SweepAxis::File => "file",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the partition capacity is chosen for each workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityRule {
    Fixed(Weight),
    /// `ceil(total / count)`, raised to the heaviest item if needed
    MinPartitions(usize),
}

impl CapacityRule {
    pub fn resolve(self, h: &Hypergraph) -> Result<Weight> {
        match self {
            CapacityRule::Fixed(0) => Err(Error::Invalid("capacity must be positive".into())),
            CapacityRule::Fixed(c) => Ok(c),
            CapacityRule::MinPartitions(0) => Err(Error::Invalid("partition count must be positive".into())),
            CapacityRule::MinPartitions(ne) => {
                Ok(h.total_item_weight().div_ceil(ne as Weight).max(h.max_item_weight()).max(1))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub workload: WorkloadSpec,
    /// Benchmark hypergraph files; when non-empty they replace generation.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub capacity: CapacityRule,
    /// `N` for every cell unless partitions are swept.
    #[serde(default)]
    pub partitions: usize,
    pub sweep_axis: SweepAxis,
    /// Ignored for the file axis, where the inputs are the cells.
    #[serde(default)]
    pub sweep_values: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Also run sweep cells concurrently, not only trials.
    #[serde(default)]
    pub parallel_cells: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::Invalid(m.to_string()));
        if self.algorithms.is_empty() {
            return invalid("algorithm list is empty");
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        match self.sweep_axis {
            SweepAxis::File if self.inputs.is_empty() => return invalid("file sweep needs input files"),
            SweepAxis::File => {}
            _ if self.sweep_values.is_empty() => return invalid("sweep values are empty"),
            _ if !self.inputs.is_empty() && self.sweep_axis != SweepAxis::Partitions => {
                return invalid("benchmark inputs can only be swept over partitions or files")
            }
            _ => {}
        }
        if self.sweep_axis != SweepAxis::Partitions && self.partitions == 0 {
            return invalid("partitions must be set when not swept");
        }
        let integral = matches!(
            self.sweep_axis,
            SweepAxis::Partitions | SweepAxis::QuerySize | SweepAxis::QueryCount
        );
        if integral && self.sweep_values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return invalid("partition, query size and query count sweeps take positive integers");
        }
        Ok(())
    }

    /// The configured directory, else the environment default, else `out`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn cells(&self) -> Vec<Cell> {
        match self.sweep_axis {
            SweepAxis::File => self
                .inputs
                .iter()
                .map(|p| Cell { label: file_label(p), value: 0.0, file: Some(p.clone()) })
                .collect(),
            _ => self
                .sweep_values
                .iter()
                .map(|&v| Cell { label: v.to_string(), value: v, file: self.inputs.first().cloned() })
                .collect(),
        }
    }
}

fn file_label(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

struct Cell {
    label: String,
    value: f64,
    file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub sweep_axis: String,
    pub sweep_value: String,
    pub seed: u64,
    pub avg_span: f64,
    pub replicas: usize,
    pub max_load: Weight,
    pub runtime_ms: f64,
}

/// A run that failed, typically on infeasible parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub algorithm: String,
    pub sweep_axis: String,
    pub sweep_value: String,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

/// Mean over the seeds of one (algorithm, sweep value) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: String,
    pub sweep_axis: String,
    pub sweep_value: String,
    pub runs: usize,
    pub errors: usize,
    pub mean_avg_span: f64,
    pub mean_replicas: f64,
    pub mean_max_load: f64,
    pub mean_runtime_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub errors: Vec<ErrorRow>,
    pub summary: Vec<CellSummary>,
}

impl ExperimentResult {
    /// Mean average span of `algorithm` at a sweep value, if any run succeeded.
    pub fn mean_span(&self, algorithm: Algorithm, sweep_value: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.algorithm == algorithm.name() && s.sweep_value == sweep_value && s.runs > 0)
            .map(|s| s.mean_avg_span)
    }

    pub fn write_results_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(&self.rows, w)
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        write_csv(&self.summary, w)
    }

    pub fn write_errors_csv<W: Write>(&self, w: W) -> Result<()> {
        if self.errors.is_empty() {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["algorithm", "sweep_axis", "sweep_value", "seed", "kind", "message"])?;
            out.flush()?;
            return Ok(());
        }
        write_csv(&self.errors, w)
    }

    /// Writes the three CSV files into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_results_csv(File::create(dir.join(RESULTS_CSV))?)?;
        self.write_summary_csv(File::create(dir.join(SUMMARY_CSV))?)?;
        self.write_errors_csv(File::create(dir.join(ERRORS_CSV))?)?;
        Ok(())
    }
}

fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Workload for one cell and seed.
fn cell_workload(cfg: &ExperimentConfig, cell: &Cell, seed: u64) -> Result<Hypergraph> {
    if let Some(path) = &cell.file {
        return load_hypergraph(path, None);
    }
    let mut spec = WorkloadSpec { seed, ..cfg.workload.clone() };
    let v = cell.value as usize;
    match cfg.sweep_axis {
        SweepAxis::QuerySize => {
            spec.min_query_size = v;
            spec.max_query_size = v;
        }
        SweepAxis::QueryCount => spec.query_count = v,
        SweepAxis::Density => spec.density = cell.value,
        SweepAxis::Partitions | SweepAxis::File => {}
    }
    Ok(Workload::generate(&spec)?.hypergraph)
}

/// Runs every (sweep value, seed, algorithm) combination. Seeds are
/// `base_seed + trial`. Failed runs become [`ErrorRow`]s. Rows come back in
/// sweep order, then seed, then algorithm list order, whatever the
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let cells = cfg.cells();
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|t| cfg.base_seed + t).collect();

    let run_cell = |ci: usize| -> Vec<(usize, u64, usize, std::result::Result<ResultRow, ErrorRow>)> {
        let cell = &cells[ci];
        seeds
            .par_iter()
            .flat_map_iter(|&seed| run_trial(cfg, cell, seed).into_iter().map(move |(ai, r)| (ci, seed, ai, r)))
            .collect()
    };
    let mut outcomes: Vec<_> = if cfg.parallel_cells {
        (0..cells.len()).into_par_iter().flat_map_iter(run_cell).collect()
    } else {
        (0..cells.len()).flat_map(run_cell).collect()
    };
    outcomes.sort_by_key(|&(ci, seed, ai, _)| (ci, seed, ai));

    let mut result = ExperimentResult::default();
    for (_, _, _, r) in outcomes {
        match r {
            Ok(row) => result.rows.push(row),
            Err(e) => result.errors.push(e),
        }
    }
    result.summary = summarize(cfg, &cells, &result);
    Ok(result)
}

fn run_trial(
    cfg: &ExperimentConfig,
    cell: &Cell,
    seed: u64,
) -> Vec<(usize, std::result::Result<ResultRow, ErrorRow>)> {
    let axis = cfg.sweep_axis.name().to_string();
    let error_row = |algo: &str, e: &Error| ErrorRow {
        algorithm: algo.to_string(),
        sweep_axis: axis.clone(),
        sweep_value: cell.label.clone(),
        seed,
        kind: e.kind().to_string(),
        message: e.to_string(),
    };
    let setup = cell_workload(cfg, cell, seed).and_then(|h| {
        let c = cfg.capacity.resolve(&h)?;
        Ok((h, c))
    });
    let (h, c) = match setup {
        Ok(x) => x,
        Err(e) => {
            return cfg.algorithms.iter().enumerate().map(|(ai, a)| (ai, Err(error_row(a.name(), &e)))).collect();
        }
    };
    let n = match cfg.sweep_axis {
        SweepAxis::Partitions => cell.value as usize,
        _ => cfg.partitions,
    };
    cfg.algorithms
        .iter()
        .enumerate()
        .map(|(ai, &algo)| {
            let row = run_algorithm(algo, &h, n, c, seed)
                .and_then(|out| {
                    let report = average_span(&out.placement, &h)?;
                    Ok(ResultRow {
                        algorithm: algo.name().to_string(),
                        sweep_axis: axis.clone(),
                        sweep_value: cell.label.clone(),
                        seed,
                        avg_span: report.average_f64(),
                        replicas: out.placement.replicas(h.num_items()),
                        max_load: out.placement.max_load(&h),
                        runtime_ms: out.timings.iter().map(|t| t.millis).sum(),
                    })
                })
                .map_err(|e| error_row(algo.name(), &e));
            (ai, row)
        })
        .collect()
}

fn summarize(cfg: &ExperimentConfig, cells: &[Cell], result: &ExperimentResult) -> Vec<CellSummary> {
    let mut runs: BTreeMap<(&str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in &result.rows {
        runs.entry((&r.sweep_value, &r.algorithm)).or_default().push(r);
    }
    let mut errors: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for e in &result.errors {
        *errors.entry((&e.sweep_value, &e.algorithm)).or_default() += 1;
    }
    let mean = |xs: &[&ResultRow], f: &dyn Fn(&ResultRow) -> f64| {
        if xs.is_empty() {
            f64::NAN
        } else {
            xs.iter().map(|r| f(r)).sum::<f64>() / xs.len() as f64
        }
    };
    let mut out = Vec::new();
    for cell in cells {
        for algo in &cfg.algorithms {
            let key = (cell.label.as_str(), algo.name());
            let rows = runs.get(&key).map_or(&[][..], Vec::as_slice);
            out.push(CellSummary {
                algorithm: algo.name().to_string(),
                sweep_axis: cfg.sweep_axis.name().to_string(),
                sweep_value: cell.label.clone(),
                runs: rows.len(),
                errors: errors.get(&key).copied().unwrap_or(0),
                mean_avg_span: mean(rows, &|r| r.avg_span),
                mean_replicas: mean(rows, &|r| r.replicas as f64),
                mean_max_load: mean(rows, &|r| r.max_load as f64),
                mean_runtime_ms: mean(rows, &|r| r.runtime_ms),
            });
        }
    }
    out
}

/// Reads a benchmark hypergraph, with vertex weights from an optional
/// sidecar file.
pub fn load_hypergraph(path: &Path, weights: Option<&Path>) -> Result<Hypergraph> {
    let h = parse_benchmark_hypergraph(BufReader::new(File::open(path)?))?;
    let Some(wpath) = weights else {
        return Ok(h);
    };
    let w = parse_weights(BufReader::new(File::open(wpath)?))?;
    if w.len() != h.num_items() {
        return Err(Error::Invalid(format!(
            "{} weights for {} items in {}",
            w.len(),
            h.num_items(),
            wpath.display()
        )));
    }
    Hypergraph::from_edges(w, h.edges().to_vec())
}

/// Reads a placement stored as JSON ([`PlacementFile`]) or as
/// `item partition` pairs. Pair files carry no capacity, so `capacity`
/// must be supplied for them.
pub fn load_placement(path: &Path, capacity: Option<Weight>) -> Result<Placement> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        let file: PlacementFile = serde_json::from_str(&text)?;
        let mut p = file.into_placement();
        if let Some(c) = capacity {
            p = Placement::new(c, p.partitions().to_vec());
        }
        return Ok(p);
    }
    let c = capacity.unwrap_or(Weight::MAX);
    Placement::read_pairs(text.as_bytes(), c)
}

/// Replays a stored placement against a workload.
pub fn evaluate_placement(placement: &Placement, h: &Hypergraph) -> Result<SpanReport> {
    placement.check_coverage(h)?;
    average_span(placement, h)
}

/// [`evaluate_placement`] on files.
pub fn evaluate_files(placement: &Path, hypergraph: &Path, weights: Option<&Path>) -> Result<SpanReport> {
    let h = load_hypergraph(hypergraph, weights)?;
    evaluate_placement(&load_placement(placement, None)?, &h)
}
