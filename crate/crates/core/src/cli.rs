//! Command-line front end: `split`, `bench`, `synth` and `export-embeddings`.
//!
//! Configuration precedence is flags > `--config` JSON file > built-in
//! defaults. Every run directory gets a `manifest.json` holding the resolved
//! configuration; feeding that manifest back through `--config` reproduces a
//! deterministic run.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{learning_curve_on_split, BenchConfig, LimitScope, NoObserver};
use crate::embed::{export_embeddings, train_on_stream};
use crate::error::Error;
use crate::featclass::EdgeOperator;
use crate::graph::{load_graph, relation_subgraph, KnowledgeGraph};
use crate::metrics::{write_comparison_csv, write_report_csv, write_report_json, EvalReport, Mode};
use crate::split::{build_split, export_split, CorruptionStrategy};
use crate::synth::PlantedPartition;

pub const MANIFEST: &str = "manifest.json";

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(Error::InvalidParameter(_)) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "kgbench", version, about = "Link-prediction benchmark for knowledge-graph entity embeddings")]
pub struct Cli {
    /// Worker threads for parallel phases (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a graph into train/test positives and negatives.
    Split(SplitArgs),
    /// Run the benchmark and write reports.
    Bench(BenchArgs),
    /// Generate a planted-partition graph.
    Synth(SynthArgs),
    /// Train embeddings on a graph and write them as TSV.
    ExportEmbeddings(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Global,
    Local,
    Both,
}

impl RunMode {
    fn modes(self) -> &'static [Mode] {
        match self {
            RunMode::Global => &[Mode::Global],
            RunMode::Local => &[Mode::Local],
            RunMode::Both => &[Mode::Global, Mode::Local],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OperatorArg {
    Hadamard,
    Average,
    Concat,
    L1,
    L2,
}

impl From<OperatorArg> for EdgeOperator {
    fn from(o: OperatorArg) -> Self {
        match o {
            OperatorArg::Hadamard => EdgeOperator::Hadamard,
            OperatorArg::Average => EdgeOperator::Average,
            OperatorArg::Concat => EdgeOperator::Concat,
            OperatorArg::L1 => EdgeOperator::L1,
            OperatorArg::L2 => EdgeOperator::L2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    CorruptHead,
    CorruptTail,
    CorruptBoth,
}

impl From<StrategyArg> for CorruptionStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::CorruptHead => CorruptionStrategy::CorruptHead,
            StrategyArg::CorruptTail => CorruptionStrategy::CorruptTail,
            StrategyArg::CorruptBoth => CorruptionStrategy::CorruptBoth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LimitScopeArg {
    ClassifierOnly,
    EmbeddingsAndClassifier,
}

impl From<LimitScopeArg> for LimitScope {
    fn from(s: LimitScopeArg) -> Self {
        match s {
            LimitScopeArg::ClassifierOnly => LimitScope::ClassifierOnly,
            LimitScopeArg::EmbeddingsAndClassifier => LimitScope::EmbeddingsAndClassifier,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitFlags {
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Train negatives per train positive.
    #[arg(long)]
    pub neg_ratio: Option<f64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Keep corrupted triples even if they are true edges.
    #[arg(long)]
    pub unfiltered: bool,
    #[arg(long)]
    pub min_test: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial embedding learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub neg_k: Option<usize>,
    /// Sequential, bit-reproducible embedding training.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<RunMode>,
    /// Comma-separated training-data fractions, ascending, in (0, 1].
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub limit_scope: Option<LimitScopeArg>,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorArg>,
    #[arg(long)]
    pub clf_lr: Option<f64>,
    #[arg(long)]
    pub clf_epochs: Option<usize>,
    #[arg(long)]
    pub l2_reg: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub embed: EmbedFlags,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 100)]
    pub nodes_per_block: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output TSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Train on this relation's subgraph only.
    #[arg(long)]
    pub relation: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output TSV file; a `.json` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub embed: EmbedFlags,
}

/// Everything a run depends on, after merging defaults, file and flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolvedConfig {
    pub run_mode: RunMode,
    pub threads: usize,
    pub bench: BenchConfig,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        ResolvedConfig {
            run_mode: RunMode::Global,
            threads: 0,
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub config: ResolvedConfig,
    pub seed: u64,
    pub input: Option<String>,
    /// `sha256:<hex>` of the input file.
    pub input_digest: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

/// Reads a `--config` file: either a bare [`ResolvedConfig`] (missing keys
/// take defaults) or a [`RunManifest`] from an earlier run.
pub fn load_config(path: &Path) -> CliResult<ResolvedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let cfg = match value.get("config") {
        Some(inner) if value.get("toolkit_version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(cfg).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn base_config(path: Option<&Path>) -> CliResult<ResolvedConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ResolvedConfig::default()),
    }
}

fn apply_split_flags(cfg: &mut BenchConfig, f: &SplitFlags) {
    let s = &mut cfg.split;
    if let Some(v) = f.test_fraction {
        s.test_fraction = v;
    }
    if let Some(v) = f.neg_ratio {
        s.neg_ratio_train = v;
    }
    if let Some(v) = f.strategy {
        s.strategy = v.into();
    }
    if f.unfiltered {
        s.filtered = false;
    }
    if let Some(v) = f.min_test {
        s.min_test_threshold = v;
    }
}

fn apply_embed_flags(cfg: &mut BenchConfig, f: &EmbedFlags) {
    let e = &mut cfg.embedding;
    if let Some(v) = f.dim {
        e.dim = v;
    }
    if let Some(v) = f.epochs {
        e.epochs = v;
    }
    if let Some(v) = f.lr {
        e.lr0 = v;
    }
    if let Some(v) = f.neg_k {
        e.neg_k = v;
    }
    if let Some(v) = f.deterministic {
        e.deterministic = v;
    }
}

fn set_seed(cfg: &mut ResolvedConfig, seed: Option<u64>) {
    if let Some(s) = seed {
        cfg.bench.seed = s;
    }
    cfg.bench.embedding.seed = cfg.bench.seed;
}

pub fn resolve_bench(args: &BenchArgs, threads: Option<usize>) -> CliResult<ResolvedConfig> {
    let mut cfg = base_config(args.config.as_deref())?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(m) = args.mode {
        cfg.run_mode = m;
    }
    let b = &mut cfg.bench;
    if let Some(f) = &args.fractions {
        b.fractions = f.clone();
    }
    if let Some(s) = args.limit_scope {
        b.limit_scope = s.into();
    }
    if let Some(o) = args.operator {
        b.operator = o.into();
    }
    if let Some(v) = args.clf_lr {
        b.classifier.lr = v;
    }
    if let Some(v) = args.clf_epochs {
        b.classifier.epochs = v;
    }
    if let Some(v) = args.l2_reg {
        b.classifier.l2_reg = v;
    }
    apply_embed_flags(b, &args.embed);
    apply_split_flags(b, &args.split);
    set_seed(&mut cfg, args.seed);
    cfg.bench.validate()?;
    Ok(cfg)
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes `manifest.json` via a temporary file and rename.
fn write_manifest(dir: &Path, manifest: &RunManifest) -> CliResult<()> {
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    let dst = dir.join(MANIFEST);
    let mut json = serde_json::to_string_pretty(manifest).map_err(Error::from)?;
    json.push('\n');
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))?;
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn load(path: &Path) -> CliResult<KnowledgeGraph> {
    Ok(load_graph(path)?.0)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn fraction_tag(f: f64) -> String {
    format!("f{f}")
}

pub fn report_stem(mode: Mode, fraction: f64) -> String {
    format!("report_{mode}_{}", fraction_tag(fraction))
}

fn cmd_split(args: &SplitArgs, threads: Option<usize>) -> CliResult<()> {
    let started_at = now();
    let mut cfg = base_config(args.config.as_deref())?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    apply_split_flags(&mut cfg.bench, &args.split);
    set_seed(&mut cfg, args.seed);
    cfg.bench.split.validate()?;

    let g = load(&args.graph)?;
    let split = with_threads(cfg.threads, || build_split(&g, &cfg.bench.split, cfg.bench.seed))??;
    create_dir(&args.out)?;
    let outputs = export_split(&split, &g, &args.out)?;

    write_manifest(
        &args.out,
        &RunManifest {
            toolkit_version: crate::VERSION.to_owned(),
            command: "split".to_owned(),
            seed: cfg.bench.seed,
            config: cfg,
            input: Some(args.graph.display().to_string()),
            input_digest: Some(file_digest(&args.graph)?),
            started_at,
            finished_at: now(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        },
    )
}

fn write_report(dir: &Path, report: &EvalReport, outputs: &mut Vec<String>) -> CliResult<()> {
    let stem = report_stem(report.mode, report.fraction);
    let json = format!("{stem}.json");
    let csv = format!("{stem}.csv");
    write_report_json(report, &dir.join(&json))?;
    write_report_csv(report, &dir.join(&csv))?;
    outputs.push(json);
    outputs.push(csv);
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs, threads: Option<usize>) -> CliResult<Vec<EvalReport>> {
    let started_at = now();
    let cfg = resolve_bench(args, threads)?;
    let g = load(&args.graph)?;
    create_dir(&args.out)?;

    let runs = with_threads(cfg.threads, || -> crate::Result<Vec<Vec<(f64, EvalReport)>>> {
        let split = build_split(&g, &cfg.bench.split, cfg.bench.seed)?;
        cfg.run_mode
            .modes()
            .iter()
            .map(|&mode| {
                let bench = BenchConfig {
                    mode,
                    ..cfg.bench.clone()
                };
                learning_curve_on_split(&g, &split, &bench, mode, &mut NoObserver)
            })
            .collect()
    })??;

    let mut outputs = Vec::new();
    let mut reports = Vec::new();
    for curve in &runs {
        if curve.is_empty() {
            return Err(Error::NothingToEvaluate("no learning-curve point could be evaluated".into()).into());
        }
        for (_, report) in curve {
            write_report(&args.out, report, &mut outputs)?;
            reports.push(report.clone());
        }
    }
    if let [global, local] = runs.as_slice() {
        for (_, g_rep) in global {
            if let Some((_, l_rep)) = local.iter().find(|(f, _)| *f == g_rep.fraction) {
                let name = format!("comparison_{}.csv", fraction_tag(g_rep.fraction));
                write_comparison_csv(g_rep, l_rep, &args.out.join(&name))?;
                outputs.push(name);
            }
        }
    }

    for r in &reports {
        log::info!(
            "{} f={}: micro F1 {:.4}, macro F1 {:.4} over {} relation(s)",
            r.mode,
            r.fraction,
            r.micro_f1,
            r.macro_f1,
            r.per_relation.len()
        );
    }

    write_manifest(
        &args.out,
        &RunManifest {
            toolkit_version: crate::VERSION.to_owned(),
            command: "bench".to_owned(),
            seed: cfg.bench.seed,
            config: cfg,
            input: Some(args.graph.display().to_string()),
            input_digest: Some(file_digest(&args.graph)?),
            started_at,
            finished_at: now(),
            outputs,
        },
    )?;
    Ok(reports)
}

fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let params = PlantedPartition {
        blocks: args.blocks,
        nodes_per_block: args.nodes_per_block,
        p_in: args.p_in,
        p_out: args.p_out,
        seed: args.seed,
    };
    params.validate()?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let n = params.write_tsv(&args.out)?;
    log::info!("wrote {n} edges to {}", args.out.display());
    Ok(())
}

fn cmd_export(args: &ExportArgs, threads: Option<usize>) -> CliResult<()> {
    let mut cfg = base_config(args.config.as_deref())?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    apply_embed_flags(&mut cfg.bench, &args.embed);
    set_seed(&mut cfg, args.seed);
    cfg.bench.embedding.validate()?;

    let g = load(&args.graph)?;
    let triples = match &args.relation {
        None => g.triples().to_vec(),
        Some(label) => {
            let r = g
                .relation_id(label)
                .ok_or_else(|| CliError::Usage(format!("unknown relation {label:?}")))?;
            let sub = relation_subgraph(&g, r)?;
            sub.graph
                .triples()
                .iter()
                .map(|t| sub.to_global(t).expect("local ids map back"))
                .collect()
        }
    };
    let space = with_threads(cfg.threads, || train_on_stream(&triples, &cfg.bench.embedding))??;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    export_embeddings(&space, g.entities(), &args.out)?;
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Split(a) => cmd_split(a, cli.threads),
        Command::Bench(a) => cmd_bench(a, cli.threads).map(|_| ()),
        Command::Synth(a) => cmd_synth(a),
        Command::ExportEmbeddings(a) => cmd_export(a, cli.threads),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kgbench: error: {e}");
            e.exit_code()
        }
    }
}
