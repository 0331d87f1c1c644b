//! Command-line interface.
//!
//! Exit status: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors (including missing input files).

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fuseprf_core::eval::{
    evaluate_with, paired_t_test, parse_metrics, report_jsonl, report_table, EvalOptions, Gain,
    MetricReport, TTest,
};
use fuseprf_core::fixture::{SyntheticCollection, DEFAULT_SEED};
use fuseprf_core::io::{
    detect_dim, load_corpus, load_qrels, load_run, load_term_weights, load_vectors, write_run,
    RunEntry,
};
use fuseprf_core::persist::{save_bm25, save_dense, save_impact};
use fuseprf_core::pipeline::{to_run_entries, PipelineResult, QueryWeightSource, SparseBackend};
use fuseprf_core::prf::FeedbackAggregation;
use fuseprf_core::sparse::{ImpactIndex, InvertedIndex};
use fuseprf_core::{
    run_all, DenseStore, Error, MissingPolicy, Normalization, PipelineConfig, Similarity, Stage,
};
use serde::Serialize;

use crate::config::{
    load_file_config, resolve_data_dir, usage, DataPaths, FileConfig, PathArgs, UsageError,
    DATA_DIR_ENV,
};
use crate::engine::{load_indexes, load_inputs, Needs};

const DEFAULT_METRICS: &str = "map,ndcg@10,recall@1000";

#[derive(Debug, Parser)]
#[command(
    name = "fuseprf",
    version,
    about = "Hybrid sparse/dense retrieval with vector pseudo-relevance feedback"
)]
pub struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Default directory for inputs and indexes
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index and persist it to a directory
    #[command(subcommand)]
    Index(IndexCommand),
    /// Rank every query and write a TREC run file
    Run(RunArgs),
    /// Score a run file against relevance judgments
    Eval(EvalArgs),
    /// Run and evaluate once per value of one parameter
    Sweep(SweepArgs),
    /// Serve the pipeline over HTTP
    Serve(ServeArgs),
    /// Write the seeded synthetic test collection
    GenFixture(GenFixtureArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory [default: <data-dir>/index/<kind>]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing output directory
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// BM25 inverted index over a passage corpus
    Sparse {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Impact index over precomputed passage term weights
    Impact {
        #[arg(long)]
        weights: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Dense vector store
    Dense {
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn enabled(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    None,
    Fuse,
    Pre,
    Post,
    Both,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::None => Stage::None,
            StageArg::Fuse => Stage::Fuse,
            StageArg::Pre => Stage::Pre,
            StageArg::Post => Stage::Post,
            StageArg::Both => Stage::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SparseArg {
    Bm25,
    Impact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    None,
    Minmax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MissingArg {
    Min,
    Skip,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimilarityArg {
    Dot,
    Cosine,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    Mean,
    Sum,
}

/// Pipeline settings; each one overrides the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Where sparse/dense interpolation happens
    #[arg(long, value_enum)]
    pub stage: Option<StageArg>,
    /// Vector pseudo-relevance feedback
    #[arg(long, value_enum)]
    pub prf: Option<OnOff>,
    /// Dense retrieval; `off` gives a sparse-only run
    #[arg(long, value_enum)]
    pub dense: Option<OnOff>,
    /// Interpolation weight of the sparse score
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the original query vector
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the feedback centroid
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of feedback passages
    #[arg(long)]
    pub prf_depth: Option<usize>,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
    /// Retrieval depth of every round, and of fused lists unless --fusion-depth is given
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub fusion_depth: Option<usize>,
    #[arg(long, value_enum)]
    pub sparse: Option<SparseArg>,
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    /// Score for a passage absent from one list
    #[arg(long, value_enum)]
    pub missing: Option<MissingArg>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, value_enum)]
    pub similarity: Option<SimilarityArg>,
}

impl PipelineArgs {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(s) = self.stage {
            cfg.stage = s.into();
        }
        if let Some(p) = self.prf {
            cfg.use_prf = p.enabled();
        }
        if let Some(d) = self.dense {
            cfg.dense_enabled = d.enabled();
        }
        if let Some(l) = self.lambda {
            cfg.fusion.lambda = l;
        }
        if let Some(a) = self.alpha {
            cfg.prf.alpha = a;
        }
        if let Some(b) = self.beta {
            cfg.prf.beta = b;
        }
        if let Some(k) = self.prf_depth {
            cfg.prf.depth_k = k;
        }
        if let Some(a) = self.aggregation {
            cfg.prf.aggregation = match a {
                AggregationArg::Mean => FeedbackAggregation::Mean,
                AggregationArg::Sum => FeedbackAggregation::Sum,
            };
        }
        if let Some(d) = self.depth {
            cfg.retrieval_depth = d;
            cfg.fusion.output_depth = d;
        }
        if let Some(d) = self.fusion_depth {
            cfg.fusion.output_depth = d;
        }
        if let Some(s) = self.sparse {
            cfg.sparse_backend = match s {
                SparseArg::Bm25 => SparseBackend::Bm25,
                SparseArg::Impact => SparseBackend::Impact,
            };
        }
        if let Some(n) = self.norm {
            cfg.fusion.normalization = match n {
                NormArg::None => Normalization::None,
                NormArg::Minmax => Normalization::MinMax,
            };
        }
        if let Some(m) = self.missing {
            cfg.fusion.missing = match m {
                MissingArg::Min => MissingPolicy::Min,
                MissingArg::Skip => MissingPolicy::Skip,
            };
        }
        if let Some(k1) = self.k1 {
            cfg.bm25.k1 = k1;
        }
        if let Some(b) = self.b {
            cfg.bm25.b = b;
        }
        if let Some(s) = self.similarity {
            cfg.similarity = match s {
                SimilarityArg::Dot => Similarity::Dot,
                SimilarityArg::Cosine => Similarity::Cosine,
            };
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub paths: PathArgs,
    /// Run file to write; a `.meta.json` sidecar is written next to it
    #[arg(long, default_value = "run.txt")]
    pub out: PathBuf,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Relevance judgments [default: <data-dir>/qrels.txt]
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Comma-separated metrics: map, ndcg@K, recall@K
    #[arg(long)]
    pub metrics: Option<String>,
    /// Second run; adds its means and paired t-test p-values
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// JSON-lines report [default: <run>.eval.jsonl]
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Use 2^grade - 1 as the nDCG gain instead of the grade itself
    #[arg(long)]
    pub exponential_gain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Lambda,
    Alpha,
    Beta,
    #[value(name = "prf_depth", alias = "prf-depth")]
    PrfDepth,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::PrfDepth => "prf_depth",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated ascending values
    #[arg(long)]
    pub values: String,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub paths: PathArgs,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<String>,
    /// Directory for the per-value run files and reports
    #[arg(long, default_value = "sweep")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub paths: PathArgs,
    #[arg(long)]
    pub host: Option<String>,
    /// Port to listen on; 0 picks a free one
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct GenFixtureArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory [default: <data-dir>]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::OutputExists(_) => 2,
                Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            };
        }
    }
    1
}

struct Session {
    file: FileConfig,
    data_dir: PathBuf,
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let file = load_file_config(cli.config.as_deref())?;
    let data_dir = resolve_data_dir(cli.data_dir.as_deref(), &file);
    let ctx = Session { file, data_dir };
    match cli.command {
        Command::Index(cmd) => cmd_index(&ctx, cmd),
        Command::Run(args) => cmd_run(&ctx, args),
        Command::Eval(args) => cmd_eval(&ctx, args),
        Command::Sweep(args) => cmd_sweep(&ctx, args),
        Command::Serve(args) => cmd_serve(&ctx, args),
        Command::GenFixture(args) => cmd_gen_fixture(&ctx, args),
    }
}

impl Session {
    fn paths(&self, args: &PathArgs) -> DataPaths {
        DataPaths::resolve(self.data_dir.clone(), args, &self.file.paths)
    }

    fn pipeline(&self, args: &PipelineArgs) -> anyhow::Result<PipelineConfig> {
        let mut cfg = self.file.pipeline;
        args.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn threads(&self, flag: Option<usize>) -> anyhow::Result<Option<usize>> {
        match flag.or(self.file.threads) {
            Some(0) => Err(usage("--threads must be at least 1")),
            t => Ok(t),
        }
    }

    fn metrics(&self, flag: Option<&str>) -> anyhow::Result<Vec<fuseprf_core::eval::Metric>> {
        let list = flag
            .or(self.file.eval.metrics.as_deref())
            .unwrap_or(DEFAULT_METRICS);
        Ok(parse_metrics(list)?)
    }
}

fn cmd_index(ctx: &Session, cmd: IndexCommand) -> anyhow::Result<()> {
    let paths = ctx.paths(&PathArgs::default());
    let default_out = |kind: &str| ctx.data_dir.join("index").join(kind);
    match cmd {
        IndexCommand::Sparse { corpus, out } => {
            let corpus = corpus.unwrap_or(paths.corpus);
            let index = InvertedIndex::build(&load_corpus(&corpus)?)?;
            let dir = out.out.unwrap_or_else(|| default_out("bm25"));
            save_bm25(&index, &dir, out.force)?;
            println!(
                "{} documents, {} terms, average length {:.2} tokens",
                index.doc_count(),
                index.term_count(),
                index.avg_doc_len()
            );
            eprintln!("BM25 index written to {}", dir.display());
        }
        IndexCommand::Impact { weights, out } => {
            let weights = weights.unwrap_or(paths.doc_weights);
            let index = ImpactIndex::build(&load_term_weights(&weights)?)?;
            let dir = out.out.unwrap_or_else(|| default_out("impact"));
            save_impact(&index, &dir, out.force)?;
            println!(
                "{} documents, {} terms",
                index.doc_count(),
                index.term_count()
            );
            eprintln!("impact index written to {}", dir.display());
        }
        IndexCommand::Dense { vectors, dim, out } => {
            let vectors = vectors.unwrap_or(paths.doc_vectors);
            let dim = match dim.or(paths.dim) {
                Some(d) => d,
                None => detect_dim(&vectors)?,
            };
            let store = DenseStore::new(dim, load_vectors(&vectors, dim)?)?;
            let dir = out.out.unwrap_or_else(|| default_out("dense"));
            save_dense(&store, &dir, out.force)?;
            println!("{} documents, dimension {}", store.len(), store.dim());
            eprintln!("dense store written to {}", dir.display());
        }
    }
    Ok(())
}

/// Sidecar written next to every run file.
#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    tag: String,
    config: &'a PipelineConfig,
    queries: usize,
    entries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    query_weights: Option<&'static str>,
}

fn weight_source_summary(results: &[PipelineResult]) -> Option<&'static str> {
    let sources: Vec<QueryWeightSource> = results
        .iter()
        .filter_map(|r| r.query_weight_source)
        .collect();
    let first = *sources.first()?;
    if sources.iter().any(|s| *s != first) {
        return Some("mixed");
    }
    Some(match first {
        QueryWeightSource::Provided => "provided",
        QueryWeightSource::TermCounts => "term_counts",
    })
}

fn sidecar_path(run: &Path) -> PathBuf {
    let mut name = run.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_run_with_meta(
    results: &[PipelineResult],
    cfg: &PipelineConfig,
    out: &Path,
) -> anyhow::Result<Vec<RunEntry>> {
    let tag = cfg.digest();
    let entries = to_run_entries(results, &tag);
    write_run(&entries, out)?;
    let meta = RunMeta {
        tag,
        config: cfg,
        queries: results.len(),
        entries: entries.len(),
        query_weights: weight_source_summary(results),
    };
    let path = sidecar_path(out);
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    if meta.query_weights == Some("term_counts") || meta.query_weights == Some("mixed") {
        eprintln!("note: query term counts used as impact weights (no encoder weights found)");
    }
    Ok(entries)
}

fn cmd_run(ctx: &Session, args: RunArgs) -> anyhow::Result<()> {
    let cfg = ctx.pipeline(&args.pipeline)?;
    let threads = ctx.threads(args.threads)?;
    let paths = ctx.paths(&args.paths);
    let indexes = load_indexes(&paths, Needs::for_config(&cfg))?;
    let inputs = load_inputs(&paths, &cfg, &indexes)?;
    let results = run_all(&inputs, &cfg, &indexes, threads)?;
    let entries = write_run_with_meta(&results, &cfg, &args.out)?;
    eprintln!(
        "{} entries for {} queries written to {} ({})",
        entries.len(),
        results.len(),
        args.out.display(),
        cfg.digest()
    );
    Ok(())
}

/// Report name for a run: its tag, or the file name when the run is empty.
fn run_name(entries: &[RunEntry], path: &Path) -> String {
    let mut tags: Vec<&str> = entries.iter().map(|e| e.tag.as_str()).collect();
    tags.sort_unstable();
    tags.dedup();
    if tags.is_empty() {
        path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        )
    } else {
        tags.join("+")
    }
}

#[derive(Serialize)]
struct TTestLine<'a> {
    run: &'a str,
    compare: &'a str,
    metric: String,
    t: f64,
    df: usize,
    p_value: f64,
    degenerate: bool,
}

fn append_path_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn cmd_eval(ctx: &Session, args: EvalArgs) -> anyhow::Result<()> {
    let metrics = ctx.metrics(args.metrics.as_deref())?;
    let qrels_path = args
        .qrels
        .clone()
        .unwrap_or_else(|| ctx.paths(&PathArgs::default()).qrels);
    let qrels = load_qrels(&qrels_path)?;
    let opts = EvalOptions {
        gain: if args.exponential_gain || ctx.file.eval.exponential_gain == Some(true) {
            Gain::Exponential
        } else {
            Gain::Linear
        },
        ..EvalOptions::default()
    };

    let run = load_run(&args.run)?;
    let name = run_name(&run, &args.run);
    let reports: Vec<MetricReport> = metrics
        .iter()
        .map(|m| evaluate_with(&run, &qrels, *m, opts))
        .collect();
    let mut jsonl = report_jsonl(&name, &reports);

    let table = match &args.compare {
        Some(other_path) => {
            let other = load_run(other_path)?;
            let other_name = run_name(&other, other_path);
            let other_reports: Vec<MetricReport> = metrics
                .iter()
                .map(|m| evaluate_with(&other, &qrels, *m, opts))
                .collect();
            let tests: Vec<TTest> = reports
                .iter()
                .zip(&other_reports)
                .map(|(a, b)| paired_t_test(&a.per_query, &b.per_query))
                .collect::<Result<_, _>>()?;
            jsonl.push_str(&report_jsonl(&other_name, &other_reports));
            for (r, t) in reports.iter().zip(&tests) {
                let line = TTestLine {
                    run: &name,
                    compare: &other_name,
                    metric: r.label(),
                    t: t.t_statistic,
                    df: t.df,
                    p_value: t.p_value,
                    degenerate: t.degenerate,
                };
                jsonl.push_str(&serde_json::to_string(&line)?);
                jsonl.push('\n');
            }
            let table = report_table(&reports, Some((&other_reports, &tests)));
            if tests.iter().any(|t| t.degenerate) {
                format!("{table}* zero-variance differences; p-value is the limiting value\n")
            } else {
                table
            }
        }
        None => report_table(&reports, None),
    };
    print!("{table}");
    let report_path = args
        .report
        .unwrap_or_else(|| append_path_suffix(&args.run, ".eval.jsonl"));
    fs::write(&report_path, jsonl).map_err(|e| Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    Ok(())
}

fn parse_sweep_values(param: SweepParam, raw: &str) -> anyhow::Result<Vec<f64>> {
    let mut values = Vec::new();
    for token in raw.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let v: f64 = if param == SweepParam::PrfDepth {
            token.parse::<usize>().map(|k| k as f64).map_err(|_| {
                usage(format!(
                    "prf_depth value `{token}` is not a positive integer"
                ))
            })?
        } else {
            token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("sweep value `{token}` is not a number")))?
        };
        values.push(v);
    }
    if values.is_empty() {
        return Err(usage("sweep needs at least one value"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("sweep values must be strictly ascending"));
    }
    Ok(values)
}

fn with_value(base: &PipelineConfig, param: SweepParam, v: f64) -> PipelineConfig {
    let mut cfg = *base;
    match param {
        SweepParam::Lambda => cfg.fusion.lambda = v,
        SweepParam::Alpha => cfg.prf.alpha = v,
        SweepParam::Beta => cfg.prf.beta = v,
        SweepParam::PrfDepth => cfg.prf.depth_k = v as usize,
    }
    cfg
}

#[derive(Serialize)]
struct SweepLine<'a> {
    param: &'a str,
    value: f64,
    run: &'a str,
    metric: String,
    mean: f64,
}

fn cmd_sweep(ctx: &Session, args: SweepArgs) -> anyhow::Result<()> {
    let values = parse_sweep_values(args.param, &args.values)?;
    let mut base = ctx.file.pipeline;
    args.pipeline.apply(&mut base);
    match args.param {
        SweepParam::Lambda if base.stage == Stage::None => {
            return Err(usage(
                "a lambda sweep needs an interpolating stage (fuse, pre, post or both)",
            ))
        }
        SweepParam::Alpha | SweepParam::Beta | SweepParam::PrfDepth if !base.use_prf => {
            return Err(usage(format!(
                "a {} sweep needs --prf on",
                args.param.name()
            )))
        }
        _ => {}
    }
    let configs: Vec<PipelineConfig> = values
        .iter()
        .map(|&v| with_value(&base, args.param, v))
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let metrics = ctx.metrics(args.metrics.as_deref())?;
    let threads = ctx.threads(args.threads)?;
    let paths = ctx.paths(&args.paths);
    let qrels = load_qrels(args.qrels.as_ref().unwrap_or(&paths.qrels))?;
    let indexes = load_indexes(&paths, Needs::for_config(&base))?;
    let inputs = load_inputs(&paths, &base, &indexes)?;

    fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    let summary_path = args.out_dir.join("sweep.jsonl");
    let mut summary = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(true)
        .open(&summary_path)
        .with_context(|| format!("creating {}", summary_path.display()))?;

    let mut rows: Vec<Vec<String>> = vec![std::iter::once(args.param.name().to_string())
        .chain(metrics.iter().map(ToString::to_string))
        .collect()];
    for (value, cfg) in values.iter().zip(&configs) {
        let label = format!("{value}");
        let run_path = args
            .out_dir
            .join(format!("run.{}-{label}.txt", args.param.name()));
        let results = run_all(&inputs, cfg, &indexes, threads)
            .with_context(|| format!("{} = {label}", args.param.name()))?;
        let entries = write_run_with_meta(&results, cfg, &run_path)?;
        let name = run_name(&entries, &run_path);
        let reports: Vec<MetricReport> = metrics
            .iter()
            .map(|m| evaluate_with(&entries, &qrels, *m, EvalOptions::default()))
            .collect();
        fs::write(
            append_path_suffix(&run_path, ".eval.jsonl"),
            report_jsonl(&name, &reports),
        )
        .with_context(|| format!("writing report for {}", run_path.display()))?;
        for r in &reports {
            let line = SweepLine {
                param: args.param.name(),
                value: *value,
                run: &name,
                metric: r.label(),
                mean: r.mean,
            };
            writeln!(summary, "{}", serde_json::to_string(&line)?)?;
        }
        summary.flush()?;
        rows.push(
            std::iter::once(label)
                .chain(reports.iter().map(|r| format!("{:.4}", r.mean)))
                .collect(),
        );
    }
    print!("{}", align(&rows));
    Ok(())
}

fn align(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn cmd_serve(ctx: &Session, args: ServeArgs) -> anyhow::Result<()> {
    let base = ctx.pipeline(&args.pipeline)?;
    let paths = ctx.paths(&args.paths);
    let host = args
        .host
        .or_else(|| ctx.file.serve.host.clone())
        .unwrap_or_else(|| "127.0.0.1".to_string());
    let port = args.port.or(ctx.file.serve.port).unwrap_or(8080);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(crate::serve::run_server(&host, port, base, paths))
}

fn cmd_gen_fixture(ctx: &Session, args: GenFixtureArgs) -> anyhow::Result<()> {
    let out = args.out.unwrap_or_else(|| ctx.data_dir.clone());
    let collection = SyntheticCollection::generate(args.seed);
    collection.write(&out)?;
    println!(
        "{} passages, {} queries, dimension {} written to {} (seed {})",
        collection.passages.len(),
        collection.queries.len(),
        collection.dim,
        out.display(),
        args.seed
    );
    Ok(())
}
