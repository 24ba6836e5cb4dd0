use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spanlayout::algos::{run_algorithm, Algorithm};
use spanlayout::harness::{self, ExperimentConfig, OUTPUT_DIR_ENV};
use spanlayout::partitioner::{compute_ubfactor, hpa_partition, PartitionConfig};
use spanlayout::span::{average_span, Locator};
use spanlayout::workload::{Workload, WorkloadKind, WorkloadSpec};
use spanlayout::{oracle, Error, Hypergraph, Placement, PlacementFile, Result, Weight};

#[derive(Parser)]
#[command(name = "spanlayout", version, about = "Replicated data placement minimizing average query span")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload as a hypergraph plus weights sidecar
    Generate(GenerateArgs),
    /// Disjoint k-way partition with the multilevel partitioner
    Partition(PartitionArgs),
    /// Run one placement algorithm
    Place(PlaceArgs),
    /// Average span of a stored placement
    Evaluate(EvaluateArgs),
    /// Run a parameter sweep from a JSON config
    Experiment(ExperimentArgs),
    /// Brute-force validators for small instances
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Input {
    /// Hypergraph in hMETIS format
    hypergraph: PathBuf,
    /// Vertex weights, one per line
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl Input {
    fn load(&self) -> Result<Hypergraph> {
        harness::load_hypergraph(&self.hypergraph, self.weights.as_deref())
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Workload spec (JSON or key = value); flags override its fields
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = "out")]
    out: PathBuf,
    /// File stem for `<name>.hgr` and `<name>.weights`
    #[arg(long, default_value = "workload")]
    name: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Random,
    Snowflake,
    Tpch,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    input: Input,
    /// Number of parts
    #[arg(long)]
    k: usize,
    /// Partition capacity
    #[arg(long)]
    c: Weight,
    /// Imbalance percentage; defaults to the widest that fits the capacity
    #[arg(long)]
    ubfactor: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the placement JSON
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct PlaceArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    algo: Algorithm,
    /// Number of partitions
    #[arg(long)]
    n: usize,
    /// Partition capacity
    #[arg(long)]
    c: Weight,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the placement JSON
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Placement as JSON or `item partition` pairs
    placement: PathBuf,
    #[command(flatten)]
    input: Input,
    /// json prints a summary, csv the span of every query
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (JSON)
    config: PathBuf,
    /// Benchmark files; replaces the config's inputs
    files: Vec<PathBuf>,
    /// Output directory; overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout: per-cell means
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Greedy against exact span for every query
    Span {
        placement: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Serialize)]
struct PlaceSummary {
    algorithm: String,
    partitions: usize,
    capacity: Weight,
    seed: u64,
    avg_span: f64,
    avg_span_exact: String,
    replicas: usize,
    max_load: Weight,
    runtime_ms: f64,
}

#[derive(Serialize)]
struct SpanCheck {
    edge: usize,
    multiplicity: u64,
    greedy: usize,
    exact: usize,
}

/// Items beyond this make the exact oracle impractical.
const ORACLE_MAX_ITEMS: usize = 12;

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(&e.to_string(), "usage");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e.to_string(), e.kind());
            ExitCode::FAILURE
        }
    }
}

fn report(message: &str, kind: &str) {
    let line = serde_json::json!({ "error": message.trim_end(), "kind": kind });
    eprintln!("{line}");
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Generate(a) => generate(a, &mut out)?,
        Command::Partition(a) => partition(a, &mut out)?,
        Command::Place(a) => place(a, &mut out)?,
        Command::Evaluate(a) => evaluate(a, &mut out)?,
        Command::Experiment(a) => experiment(a, &mut out)?,
        Command::Oracle(OracleCommand::Span { placement, input, format }) => {
            oracle_span(&placement, &input, format, &mut out)?
        }
    }
    out.flush()?;
    Ok(())
}

fn generate(a: GenerateArgs, out: &mut impl Write) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => WorkloadSpec::load(p)?,
        None => WorkloadSpec::default(),
    };
    if let Some(k) = a.kind {
        spec.kind = match k {
            KindArg::Random => WorkloadKind::Random,
            KindArg::Snowflake => WorkloadKind::Snowflake,
            KindArg::Tpch => WorkloadKind::Tpch,
        };
    }
    spec.item_count = a.items.unwrap_or(spec.item_count);
    spec.query_count = a.queries.unwrap_or(spec.query_count);
    spec.min_query_size = a.min_size.unwrap_or(spec.min_query_size);
    spec.max_query_size = a.max_size.unwrap_or(spec.max_query_size);
    spec.density = a.density.unwrap_or(spec.density);
    spec.seed = a.seed.unwrap_or(spec.seed);
    let w = Workload::generate(&spec)?;
    w.write(&a.out, &a.name)?;
    let h = &w.hypergraph;
    let summary = serde_json::json!({
        "hypergraph": a.out.join(format!("{}.hgr", a.name)),
        "weights": a.out.join(format!("{}.weights", a.name)),
        "items": h.num_items(),
        "queries": h.total_multiplicity(),
        "distinct_queries": h.num_edges(),
        "graph_edges": w.graph.num_edges(),
        "total_weight": h.total_item_weight(),
        "spec": spec,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn write_placement(path: &Path, file: &PlacementFile) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, file)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit_placement(p: &Placement, file: &PlacementFile, format: Format, out: &mut impl Write) -> Result<()> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(file)?)?,
        Format::Csv => {
            writeln!(out, "item,partition")?;
            for (g, part) in p.partitions().iter().enumerate() {
                for v in part {
                    writeln!(out, "{v},{g}")?;
                }
            }
        }
    }
    Ok(())
}

fn partition(a: PartitionArgs, out: &mut impl Write) -> Result<()> {
    let h = a.input.load()?;
    let ub = match a.ubfactor {
        Some(u) => u,
        None => compute_ubfactor(a.c, a.k, h.total_item_weight().max(1))?,
    };
    let p = hpa_partition(&h, &PartitionConfig::new(a.k, a.c, ub, a.seed))?;
    let file = PlacementFile::new(&p, None);
    match &a.output {
        Some(path) => {
            write_placement(path, &file)?;
            let report = average_span(&p, &h)?;
            let summary = serde_json::json!({
                "placement": path,
                "parts": p.num_partitions(),
                "ubfactor": ub,
                "max_load": p.max_load(&h),
                "avg_span": report.average_f64(),
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
        None => emit_placement(&p, &file, a.format, out)?,
    }
    Ok(())
}

fn place(a: PlaceArgs, out: &mut impl Write) -> Result<()> {
    let h = a.input.load()?;
    let outcome = run_algorithm(a.algo, &h, a.n, a.c, a.seed)?;
    let p = &outcome.placement;
    let report = average_span(p, &h)?;
    let file = PlacementFile::new(p, outcome.ledger.as_ref());
    let summary = PlaceSummary {
        algorithm: a.algo.name().to_string(),
        partitions: a.n,
        capacity: a.c,
        seed: a.seed,
        avg_span: report.average_f64(),
        avg_span_exact: format!("{}/{}", report.average.numer(), report.average.denom()),
        replicas: p.replicas(h.num_items()),
        max_load: p.max_load(&h),
        runtime_ms: outcome.timings.iter().map(|t| t.millis).sum(),
    };
    match &a.output {
        Some(path) => write_placement(path, &file)?,
        None if matches!(a.format, Format::Json) => {
            let both = serde_json::json!({ "summary": summary, "placement": file });
            writeln!(out, "{}", serde_json::to_string_pretty(&both)?)?;
            return Ok(());
        }
        None => {}
    }
    match a.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.serialize(&summary)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut impl Write) -> Result<()> {
    let report = harness::evaluate_files(&a.placement, &a.input.hypergraph, a.input.weights.as_deref())?;
    match a.format {
        Format::Json => writeln!(out, "{}", report.summary_json()?)?,
        Format::Csv => report.write_csv(out)?,
    }
    Ok(())
}

fn experiment(a: ExperimentArgs, out: &mut impl Write) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if !a.files.is_empty() {
        cfg.inputs = a.files;
    }
    if a.out.is_some() {
        cfg.output_dir = a.out;
    }
    cfg.validate()?;
    let result = harness::run_experiment(&cfg)?;
    let dir = cfg.resolved_output_dir();
    result.write_dir(&dir)?;
    match a.format {
        Format::Csv => result.write_summary_csv(out)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&result.summary)?)?,
    }
    if !result.errors.is_empty() {
        log::warn!("{} runs failed; see {}", result.errors.len(), dir.join(harness::ERRORS_CSV).display());
    }
    Ok(())
}

fn oracle_span(placement: &Path, input: &Input, format: Format, out: &mut impl Write) -> Result<()> {
    let h = input.load()?;
    if h.num_items() > ORACLE_MAX_ITEMS {
        return Err(Error::Invalid(format!(
            "the exact oracle handles at most {ORACLE_MAX_ITEMS} items, got {}",
            h.num_items()
        )));
    }
    let p = harness::load_placement(placement, None)?;
    p.check_coverage(&h)?;
    let locator = Locator::new(&p, h.num_items());
    let locs: Vec<Vec<usize>> = (0..h.num_items()).map(|v| locator.locations(v).to_vec()).collect();
    let rows = h
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(SpanCheck {
                edge: i,
                multiplicity: e.multiplicity(),
                greedy: locator.span(e.items())?,
                exact: oracle::exact_span(e.items(), &locs).ok_or(Error::UnplacedItem(e.items()[0]))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?,
    }
    Ok(())
}
