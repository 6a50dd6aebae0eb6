//! Command-line entry point: dataset generation and ingestion, paired
//! baseline/enhanced experiments over seed batches, and runtime benchmarks.
//!
//! Subcommands read a JSON config (`--config`), write all artifacts under
//! `--out`, and map errors to process exit codes: 0 success, 2 config error,
//! 3 data error, 4 numeric divergence. Reruns of `compare` with the same
//! config produce byte-identical reports; wall-clock timestamps are confined
//! to the manifests.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{ingest_csv, IngestManifest, SnapshotConfig};
use crate::eval::{evaluate_scored, summarize, MetricValues, ScoredEdges};
use crate::graph::{degree_statistics, TemporalSignedGraph};
use crate::hcim::{hcim_forward, FusionMode, HcimParams};
use crate::io::{
    format_f64, read_snapshots, save_checkpoint, write_loss_trace_csv, write_maybe_gz,
    write_snapshots,
};
use crate::linalg::Mat;
use crate::plot::{metric_bars, runtime_bars};
use crate::report::{render_table, report_to_csv, report_to_json};
use crate::synth::{generate_ba, generate_ws, BaConfig, WsConfig};
use crate::training::{train_run, ModelKind, TrainConfig, TrainRun};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

/// Synthetic generator selection, e.g. `{"ws": {"n": 300, "seed": 7}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorConfig {
    Ws(WsConfig),
    Ba(BaConfig),
}

impl GeneratorConfig {
    pub fn generate(&self) -> Result<TemporalSignedGraph> {
        match self {
            GeneratorConfig::Ws(cfg) => generate_ws(cfg),
            GeneratorConfig::Ba(cfg) => generate_ba(cfg),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            GeneratorConfig::Ws(_) => "ws",
            GeneratorConfig::Ba(_) => "ba",
        }
    }
}

/// Config for `generate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub generator: GeneratorConfig,
    /// Write the dataset gzipped (`dataset.json.gz`).
    #[serde(default)]
    pub gzip: bool,
}

/// Config for `ingest`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    /// `SOURCE,TARGET,RATING,TIME` CSV, optionally gzipped.
    pub csv: PathBuf,
    #[serde(default)]
    pub snapshots: SnapshotConfig,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub gzip: bool,
}

/// Where an experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    /// Generate in-process from a synthetic config.
    Generator(GeneratorConfig),
    /// Load a snapshot JSON file (optionally gzipped).
    File(PathBuf),
}

impl DatasetSource {
    pub fn load(&self) -> Result<TemporalSignedGraph> {
        match self {
            DatasetSource::Generator(g) => g.generate(),
            DatasetSource::File(path) => read_snapshots(path),
        }
    }

    /// Short dataset name used in reports and plot titles.
    pub fn label(&self) -> String {
        match self {
            DatasetSource::Generator(g) => g.label().to_string(),
            DatasetSource::File(path) => {
                let mut stem = path.file_name().and_then(|s| s.to_str()).unwrap_or("dataset");
                for suffix in [".gz", ".json"] {
                    stem = stem.strip_suffix(suffix).unwrap_or(stem);
                }
                stem.to_string()
            }
        }
    }
}

fn default_precision_k() -> usize {
    100
}

/// Benchmark sizing; the defaults match the scaling-law grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkOptions {
    /// Epochs per timed training run.
    pub epochs: usize,
    /// Node counts for the temporal-module forward grid.
    pub grid_n: Vec<usize>,
    /// History lengths for the grid.
    pub grid_t: Vec<usize>,
    /// Embedding/hidden dim used in the grid.
    pub grid_dim: usize,
    pub grid_heads: usize,
    /// Timed repetitions per grid cell (minimum is reported).
    pub grid_reps: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            epochs: 5,
            grid_n: vec![250, 500, 1000],
            grid_t: vec![2, 4, 8],
            grid_dim: 32,
            grid_heads: 4,
            grid_reps: 3,
        }
    }
}

/// One experiment: a dataset, a shared training config, and a seed batch.
/// Baseline and enhanced models always share the dataset and the per-seed
/// splits, so comparisons are paired.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub train: TrainConfig,
    /// Explicit seed list; `None` means the default batch 0..=29.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// k for precision-at-k.
    #[serde(default = "default_precision_k")]
    pub precision_k: usize,
    #[serde(default)]
    pub benchmark: BenchmarkOptions,
}

impl ExperimentSpec {
    fn resolve_seeds(&self, flag: Option<&str>) -> Result<Vec<u64>> {
        let seeds = match flag {
            Some(s) => parse_seeds(s)?,
            None => match &self.seeds {
                Some(s) => s.clone(),
                None => (0..30).collect(),
            },
        };
        if seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seed list contains duplicates".into()));
        }
        Ok(seeds)
    }
}

/// `--seeds` accepts either a count (`10` → seeds 0..10) or an explicit
/// comma-separated list (`0,3,17`).
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Config("--seeds must not be empty".into()));
    }
    if s.contains(',') {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("bad seed {:?} in --seeds list", p.trim())))
            })
            .collect()
    } else {
        let n: u64 = s
            .parse()
            .map_err(|_| Error::Config(format!("--seeds expects a count or list, got {s:?}")))?;
        if n == 0 {
            return Err(Error::Config("--seeds 0 selects no seeds".into()));
        }
        Ok((0..n).collect())
    }
}

fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = crate::io::read_maybe_gz(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_maybe_gz(path, &serde_json::to_vec_pretty(value)?)
}

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "tslp",
    version,
    about = "Temporal signed link prediction: datasets, experiments, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum ModelSel {
    Baseline,
    Enhanced,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FusionArg {
    Global,
    Adaptive,
}

impl From<FusionArg> for FusionMode {
    fn from(f: FusionArg) -> FusionMode {
        match f {
            FusionArg::Global => FusionMode::Global,
            FusionArg::Adaptive => FusionMode::NodeAdaptive,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a synthetic temporal signed network (WS or BA).
    Generate {
        /// Generator config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for dataset + manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a SOURCE,TARGET,RATING,TIME CSV into the snapshot format.
    Ingest {
        /// Ingest config JSON (csv path, snapshot settings).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train baseline and enhanced models over a seed batch and compare.
    Compare {
        /// Experiment spec JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed count (`10`) or explicit list (`0,3,17`); overrides the spec.
        #[arg(long)]
        seeds: Option<String>,
        /// Which models to train.
        #[arg(long, value_enum, default_value_t = ModelSel::Both)]
        model: ModelSel,
        /// Override the fusion mode of the enhanced model.
        #[arg(long, value_enum)]
        fusion: Option<FusionArg>,
        /// Skip SVG plot emission.
        #[arg(long)]
        no_plots: bool,
        /// Worker threads for the seed fan-out (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Measure per-epoch runtimes and temporal-module forward scaling.
    Benchmark {
        /// Experiment spec JSON (benchmark sizing under "benchmark").
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the timed runs (first of the batch).
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        no_plots: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Process entry point: parses `std::env::args`, runs, maps errors to exit
/// codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse_from(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits; usage errors are config
            // errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Testable variant of [`run`]: takes explicit args (including the program
/// name) and surfaces errors instead of exiting.
pub fn run_from<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli =
        Cli::try_parse_from(args).map_err(|e| Error::Config(format!("argument error: {e}")))?;
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Generate { config, out } => cmd_generate(&config, &out),
        Cmd::Ingest { config, out } => cmd_ingest(&config, &out),
        Cmd::Compare { config, out, seeds, model, fusion, no_plots, jobs } => {
            let mut spec: ExperimentSpec = load_json_config(&config)?;
            if let Some(f) = fusion {
                spec.train.fusion = f.into();
            }
            let seed_list = spec.resolve_seeds(seeds.as_deref())?;
            with_pool(jobs, || cmd_compare(&spec, &seed_list, model, &out, no_plots))
        }
        Cmd::Benchmark { config, out, seeds, no_plots, jobs } => {
            let spec: ExperimentSpec = load_json_config(&config)?;
            let seed_list = spec.resolve_seeds(seeds.as_deref())?;
            with_pool(jobs, || cmd_benchmark(&spec, seed_list[0], &out, no_plots))
        }
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        Some(k) if k >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("--jobs {k}: {e}")))?
            .install(f),
        Some(k) => Err(Error::Config(format!("--jobs must be ≥ 1, got {k}"))),
        None => f(),
    }
}

// ---------------------------------------------------------------------------
// generate / ingest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GenerateManifest<'a> {
    command: &'static str,
    config: &'a GenerateConfig,
    dataset_file: String,
    node_count: usize,
    snapshot_count: usize,
    /// Degree statistics of the last snapshot (top-5% hub edge share).
    final_degree_stats: crate::graph::DegreeStats,
    /// Reading of the WS neighborhood parameter, recorded so it is never
    /// switched silently: `half_k` counts lattice neighbors per side, so the
    /// initial ring degree is `2·half_k`.
    ws_half_k_reading: Option<String>,
    generated_at_unix: u64,
}

pub fn cmd_generate(config_path: &Path, out: &Path) -> Result<()> {
    let cfg: GenerateConfig = load_json_config(config_path)?;
    let tg = cfg.generator.generate()?;
    std::fs::create_dir_all(out)?;
    let dataset_file =
        if cfg.gzip { "dataset.json.gz".to_string() } else { "dataset.json".to_string() };
    write_snapshots(&tg, &out.join(&dataset_file))?;
    let last = tg.snapshots().last().expect("temporal graph is nonempty");
    let stats = degree_statistics(last, 0.05);
    let ws_half_k_reading = match &cfg.generator {
        GeneratorConfig::Ws(ws) => Some(format!(
            "half_k = {} neighbors per side; initial ring degree {}",
            ws.half_k,
            2 * ws.half_k
        )),
        GeneratorConfig::Ba(_) => None,
    };
    let manifest = GenerateManifest {
        command: "generate",
        config: &cfg,
        dataset_file,
        node_count: tg.node_count(),
        snapshot_count: tg.len(),
        final_degree_stats: stats.clone(),
        ws_half_k_reading,
        generated_at_unix: unix_now(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "generated {} dataset: n={}, T={}",
        cfg.generator.label(),
        tg.node_count(),
        tg.len()
    );
    println!(
        "final snapshot degrees: median={:.1} mean={:.2} max={:.0} max/median={:.2} top-5% edge share={:.3}",
        stats.median_degree,
        stats.mean_degree,
        stats.max_degree,
        stats.max_to_median_ratio,
        stats.top_fraction_edge_share
    );
    Ok(())
}

#[derive(Serialize)]
struct IngestOutManifest<'a> {
    command: &'static str,
    config: &'a IngestConfig,
    dataset_file: String,
    ingest: &'a IngestManifest,
    generated_at_unix: u64,
}

pub fn cmd_ingest(config_path: &Path, out: &Path) -> Result<()> {
    let cfg: IngestConfig = load_json_config(config_path)?;
    let (disc, manifest) = ingest_csv(&cfg.csv, &cfg.snapshots, cfg.directed)?;
    std::fs::create_dir_all(out)?;
    let dataset_file =
        if cfg.gzip { "dataset.json.gz".to_string() } else { "dataset.json".to_string() };
    write_snapshots(&disc.graph, &out.join(&dataset_file))?;
    let wrapper = IngestOutManifest {
        command: "ingest",
        config: &cfg,
        dataset_file,
        ingest: &manifest,
        generated_at_unix: unix_now(),
    };
    write_json(&out.join("manifest.json"), &wrapper)?;
    println!(
        "ingested {}: {} nodes, {} edges, positive fraction {:.3}, {} rejected rows",
        cfg.csv.display(),
        manifest.node_count,
        manifest.accepted_ratings,
        manifest.positive_fraction,
        manifest.rejected_rows
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct SeedEval {
    metrics: MetricValues,
    wall_clock_secs: f64,
}

/// Trains one model and evaluates it on its held-out test edges.
fn train_and_eval(
    tg: &TemporalSignedGraph,
    cfg: &TrainConfig,
    k: usize,
    run_dir: Option<&Path>,
) -> Result<SeedEval> {
    let run = train_run(tg, cfg)?;
    let scores: Vec<f64> = run.split.test.iter().map(|e| run.score(e.src, e.dst)).collect();
    let signs: Vec<i8> = run.split.test.iter().map(|e| e.sign).collect();
    let metrics = evaluate_scored(&ScoredEdges::new(scores, signs)?, k)?;
    if let Some(dir) = run_dir {
        write_run_artifacts(dir, &run)?;
    }
    Ok(SeedEval { metrics, wall_clock_secs: run.wall_clock_secs })
}

/// Per-run artifacts: config echo, loss trace, checkpoint, and (for the
/// enhanced model) the learned temporal-parameter dump.
fn write_run_artifacts(dir: &Path, run: &TrainRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), &run.config)?;
    write_loss_trace_csv(&run.loss_trace, &dir.join("loss.csv"))?;
    save_checkpoint(&run.params, &dir.join("checkpoint.json.gz"))?;
    if let Some(interp) = &run.interpretability {
        write_json(&dir.join("interpretability.json"), interp)?;
    }
    Ok(())
}

enum PairOutcome {
    Done(Box<(SeedEval, SeedEval)>),
    Diverged(String),
}

fn run_pair(
    tg: &TemporalSignedGraph,
    train: &TrainConfig,
    seed: u64,
    k: usize,
    runs_dir: &Path,
) -> Result<PairOutcome> {
    let mut base_cfg = train.clone();
    base_cfg.model = ModelKind::Baseline;
    base_cfg.seed = seed;
    let mut enh_cfg = train.clone();
    enh_cfg.model = ModelKind::Enhanced;
    enh_cfg.seed = seed;
    let base_dir = runs_dir.join(format!("baseline-seed-{seed}"));
    let enh_dir = runs_dir.join(format!("enhanced-seed-{seed}"));
    let base = match train_and_eval(tg, &base_cfg, k, Some(&base_dir)) {
        Ok(e) => e,
        Err(Error::Numeric(msg)) => return Ok(PairOutcome::Diverged(format!("baseline: {msg}"))),
        Err(e) => return Err(e),
    };
    let enh = match train_and_eval(tg, &enh_cfg, k, Some(&enh_dir)) {
        Ok(e) => e,
        Err(Error::Numeric(msg)) => return Ok(PairOutcome::Diverged(format!("enhanced: {msg}"))),
        Err(e) => return Err(e),
    };
    Ok(PairOutcome::Done(Box::new((base, enh))))
}

#[derive(Serialize)]
struct CompareManifest<'a> {
    command: &'static str,
    dataset: &'a DatasetSource,
    train: &'a TrainConfig,
    precision_k: usize,
    seeds: &'a [u64],
    model: &'static str,
    diverged_seeds: Vec<u64>,
    warnings: &'a [String],
    generated_at_unix: u64,
}

fn model_sel_name(m: ModelSel) -> &'static str {
    match m {
        ModelSel::Baseline => "baseline",
        ModelSel::Enhanced => "enhanced",
        ModelSel::Both => "both",
    }
}

pub(crate) fn cmd_compare(
    spec: &ExperimentSpec,
    seeds: &[u64],
    model: ModelSel,
    out: &Path,
    no_plots: bool,
) -> Result<()> {
    spec.train.validate()?;
    let tg = spec.dataset.load()?;
    let label = spec.dataset.label();
    let k = spec.precision_k;
    std::fs::create_dir_all(out)?;
    let runs_dir = out.join("runs");

    if model != ModelSel::Both {
        return compare_single_model(spec, seeds, model, out, &tg, &label);
    }
    if seeds.len() < 2 {
        return Err(Error::Config(format!(
            "paired statistics need at least 2 seeds, got {}",
            seeds.len()
        )));
    }

    let outcomes: Vec<(u64, PairOutcome)> = seeds
        .par_iter()
        .map(|&s| run_pair(&tg, &spec.train, s, k, &runs_dir).map(|o| (s, o)))
        .collect::<Result<Vec<_>>>()?;

    let mut diverged: Vec<u64> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut evals: Vec<(u64, SeedEval, SeedEval)> = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            PairOutcome::Done(pair) => {
                let (b, e) = *pair;
                evals.push((seed, b, e));
            }
            PairOutcome::Diverged(msg) => {
                warnings.push(format!("seed {seed} diverged and was excluded: {msg}"));
                diverged.push(seed);
            }
        }
    }
    if !diverged.is_empty() {
        let frac = diverged.len() as f64 / seeds.len() as f64;
        if frac >= 0.1 {
            return Err(Error::Numeric(format!(
                "{} of {} seeds diverged (≥10%); experiment failed: {}",
                diverged.len(),
                seeds.len(),
                warnings.join("; ")
            )));
        }
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    if evals.len() < 2 {
        return Err(Error::Numeric(format!(
            "only {} seed(s) survived; paired statistics need at least 2",
            evals.len()
        )));
    }

    let collect = |f: fn(&MetricValues) -> f64| -> (Vec<f64>, Vec<f64>) {
        (evals.iter().map(|(_, b, _)| f(&b.metrics)).collect(),
         evals.iter().map(|(_, _, e)| f(&e.metrics)).collect())
    };
    let (b_auc, e_auc) = collect(|m| m.auc);
    let (b_f1, e_f1) = collect(|m| m.f1);
    let (b_pk, e_pk) = collect(|m| m.p_at_k);
    let pk_name = format!("p@{k}");
    let report = summarize(&[
        ("auc", &b_auc, &e_auc),
        ("f1", &b_f1, &e_f1),
        (&pk_name, &b_pk, &e_pk),
    ])?;

    let clamped = evals
        .iter()
        .filter(|(_, b, e)| b.metrics.p_at_k_clamped || e.metrics.p_at_k_clamped)
        .count();
    if clamped > 0 {
        warnings.push(format!(
            "precision@{k} denominator clamped to the test-set size on {clamped} of {} seeds",
            evals.len()
        ));
    }

    write_maybe_gz(&out.join("report.csv"), report_to_csv(&label, &report).as_bytes())?;
    write_maybe_gz(&out.join("report.json"), report_to_json(&label, &report)?.as_bytes())?;
    let manifest = CompareManifest {
        command: "compare",
        dataset: &spec.dataset,
        train: &spec.train,
        precision_k: k,
        seeds,
        model: model_sel_name(model),
        diverged_seeds: diverged,
        warnings: &warnings,
        generated_at_unix: unix_now(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    if !no_plots {
        let plots = out.join("plots");
        std::fs::create_dir_all(&plots)?;
        let title = format!("{label}: baseline vs enhanced ({} seeds)", evals.len());
        write_maybe_gz(&plots.join("metrics.svg"), metric_bars(&title, &report)?.as_bytes())?;
        let mean = |sel: fn(&(u64, SeedEval, SeedEval)) -> f64| -> f64 {
            evals.iter().map(sel).sum::<f64>() / evals.len() as f64
        };
        let walls = [mean(|(_, b, _)| b.wall_clock_secs), mean(|(_, _, e)| e.wall_clock_secs)];
        let svg = runtime_bars(
            &format!("{label}: mean training wall-clock per run"),
            &["baseline".to_string(), "enhanced".to_string()],
            &walls,
        )?;
        write_maybe_gz(&plots.join("runtime.svg"), svg.as_bytes())?;
    }

    print!("{}", render_table(&label, &report));
    for w in &warnings {
        println!("note: {w}");
    }
    Ok(())
}

/// `--model baseline|enhanced`: train one model per seed and record raw
/// metric values; no paired statistics.
fn compare_single_model(
    spec: &ExperimentSpec,
    seeds: &[u64],
    model: ModelSel,
    out: &Path,
    tg: &TemporalSignedGraph,
    label: &str,
) -> Result<()> {
    let kind =
        if model == ModelSel::Baseline { ModelKind::Baseline } else { ModelKind::Enhanced };
    let name = model_sel_name(model);
    let runs_dir = out.join("runs");
    let k = spec.precision_k;
    let evals: Vec<(u64, SeedEval)> = seeds
        .par_iter()
        .map(|&s| {
            let mut cfg = spec.train.clone();
            cfg.model = kind;
            cfg.seed = s;
            let dir = runs_dir.join(format!("{name}-seed-{s}"));
            train_and_eval(tg, &cfg, k, Some(&dir)).map(|e| (s, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("dataset,model,metric,seed,value\n");
    for (seed, e) in &evals {
        for (metric, v) in [
            ("auc", e.metrics.auc),
            ("f1", e.metrics.f1),
            (&format!("p@{k}") as &str, e.metrics.p_at_k),
        ] {
            csv.push_str(&format!("{label},{name},{metric},{seed},{}\n", format_f64(v)));
        }
    }
    write_maybe_gz(&out.join("metrics.csv"), csv.as_bytes())?;
    let manifest = CompareManifest {
        command: "compare",
        dataset: &spec.dataset,
        train: &spec.train,
        precision_k: k,
        seeds,
        model: name,
        diverged_seeds: Vec::new(),
        warnings: &[],
        generated_at_unix: unix_now(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("{name}: {} runs evaluated on {label}", evals.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

/// One timed temporal-module forward cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridTiming {
    pub n: usize,
    pub t_len: usize,
    pub secs: f64,
}

/// Times `hcim_forward` on random inputs over an n×T grid (fixed d = h).
/// Reports the minimum of `reps` timed calls per cell.
pub fn time_hcim_grid(
    ns: &[usize],
    ts: &[usize],
    dim: usize,
    heads: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<GridTiming>> {
    if reps == 0 {
        return Err(Error::Config("benchmark reps must be ≥ 1".into()));
    }
    let params = HcimParams::init(dim, dim, heads, FusionMode::Global, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(ns.len() * ts.len());
    for &n in ns {
        for &t_len in ts {
            let z_cur = random_mat(&mut rng, n, dim);
            let hist: Vec<Mat> = (0..t_len).map(|_| random_mat(&mut rng, n, dim)).collect();
            hcim_forward(&hist, &z_cur, &params)?; // warm-up
            let mut best = f64::INFINITY;
            for _ in 0..reps {
                let start = Instant::now();
                hcim_forward(&hist, &z_cur, &params)?;
                best = best.min(start.elapsed().as_secs_f64());
            }
            out.push(GridTiming { n, t_len, secs: best });
        }
    }
    Ok(out)
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Ratio of grid times at consecutive n (fixed T), for the linear-in-n check.
fn n_doubling_ratios(grid: &[GridTiming], ns: &[usize], ts: &[usize]) -> Vec<(usize, f64)> {
    let cell = |n: usize, t: usize| {
        grid.iter().find(|g| g.n == n && g.t_len == t).map(|g| g.secs)
    };
    let mut out = Vec::new();
    for &t in ts {
        for pair in ns.windows(2) {
            if let (Some(a), Some(b)) = (cell(pair[0], t), cell(pair[1], t)) {
                if a > 0.0 {
                    out.push((t, b / a));
                }
            }
        }
    }
    out
}

#[derive(Serialize)]
struct BenchmarkReport<'a> {
    dataset: String,
    train_epochs: usize,
    baseline_secs_per_epoch: f64,
    enhanced_secs_per_epoch: f64,
    overhead_percent: f64,
    grid: &'a [GridTiming],
    /// (T, time ratio) for each consecutive n pair at fixed T; linear
    /// scaling in n predicts ratios near the n ratio (2 for a doubling).
    n_scaling_ratios: Vec<(usize, f64)>,
    /// (n, time ratio) from the smallest to the largest T at fixed n;
    /// superlinear growth in T is expected from the T² attention term.
    t_scaling_ratios: Vec<(usize, f64)>,
    warnings: Vec<String>,
}

pub(crate) fn cmd_benchmark(
    spec: &ExperimentSpec,
    seed: u64,
    out: &Path,
    no_plots: bool,
) -> Result<()> {
    spec.train.validate()?;
    let opts = &spec.benchmark;
    if opts.epochs == 0 {
        return Err(Error::Config("benchmark epochs must be ≥ 1".into()));
    }
    let tg = spec.dataset.load()?;
    let label = spec.dataset.label();
    std::fs::create_dir_all(out)?;

    // Per-epoch wall clock: full run minus a zero-epoch run (setup and the
    // final inference pass), divided by the epoch count.
    let mut per_epoch = [0.0_f64; 2];
    for (slot, kind) in [(0, ModelKind::Baseline), (1, ModelKind::Enhanced)] {
        let mut cfg = spec.train.clone();
        cfg.model = kind;
        cfg.seed = seed;
        cfg.epochs = opts.epochs;
        let full = train_run(&tg, &cfg)?.wall_clock_secs;
        cfg.epochs = 0;
        let setup = train_run(&tg, &cfg)?.wall_clock_secs;
        per_epoch[slot] = ((full - setup) / opts.epochs as f64).max(0.0);
    }
    let [base_epoch, enh_epoch] = per_epoch;
    let overhead = if base_epoch > 0.0 {
        100.0 * (enh_epoch - base_epoch) / base_epoch
    } else {
        f64::INFINITY
    };

    let grid =
        time_hcim_grid(&opts.grid_n, &opts.grid_t, opts.grid_dim, opts.grid_heads, opts.grid_reps, seed)?;
    let n_ratios = n_doubling_ratios(&grid, &opts.grid_n, &opts.grid_t);
    let mut t_ratios = Vec::new();
    if let (Some(&t_lo), Some(&t_hi)) = (opts.grid_t.first(), opts.grid_t.last()) {
        for &n in &opts.grid_n {
            let cell = |t: usize| grid.iter().find(|g| g.n == n && g.t_len == t).map(|g| g.secs);
            if let (Some(a), Some(b)) = (cell(t_lo), cell(t_hi)) {
                if a > 0.0 && t_hi > t_lo {
                    t_ratios.push((n, b / a));
                }
            }
        }
    }

    let mut warnings = Vec::new();
    for &(t, r) in &n_ratios {
        if r >= 2.5 {
            warnings.push(format!(
                "n-doubling time ratio {r:.2} at T={t} exceeds 2.5; investigate before trusting linear-in-n scaling"
            ));
        }
    }

    let report = BenchmarkReport {
        dataset: label.clone(),
        train_epochs: opts.epochs,
        baseline_secs_per_epoch: base_epoch,
        enhanced_secs_per_epoch: enh_epoch,
        overhead_percent: overhead,
        grid: &grid,
        n_scaling_ratios: n_ratios,
        t_scaling_ratios: t_ratios,
        warnings: warnings.clone(),
    };
    write_json(&out.join("benchmark.json"), &report)?;
    let mut csv = String::from("n,t,secs\n");
    for g in &grid {
        csv.push_str(&format!("{},{},{}\n", g.n, g.t_len, format_f64(g.secs)));
    }
    write_maybe_gz(&out.join("benchmark.csv"), csv.as_bytes())?;

    #[derive(Serialize)]
    struct BenchManifest<'a> {
        command: &'static str,
        dataset: &'a DatasetSource,
        train: &'a TrainConfig,
        benchmark: &'a BenchmarkOptions,
        seed: u64,
        generated_at_unix: u64,
    }
    write_json(
        &out.join("manifest.json"),
        &BenchManifest {
            command: "benchmark",
            dataset: &spec.dataset,
            train: &spec.train,
            benchmark: opts,
            seed,
            generated_at_unix: unix_now(),
        },
    )?;

    if !no_plots {
        let plots = out.join("plots");
        std::fs::create_dir_all(&plots)?;
        let svg = runtime_bars(
            &format!("{label}: seconds per training epoch"),
            &["baseline".to_string(), "enhanced".to_string()],
            &[base_epoch, enh_epoch],
        )?;
        write_maybe_gz(&plots.join("epoch-runtime.svg"), svg.as_bytes())?;
        let labels: Vec<String> =
            grid.iter().map(|g| format!("n={} T={}", g.n, g.t_len)).collect();
        let secs: Vec<f64> = grid.iter().map(|g| g.secs).collect();
        let svg = runtime_bars("temporal module forward scaling", &labels, &secs)?;
        write_maybe_gz(&plots.join("scaling.svg"), svg.as_bytes())?;
    }

    println!(
        "per-epoch wall clock: baseline {base_epoch:.4}s, enhanced {enh_epoch:.4}s (overhead {overhead:+.1}%)"
    );
    for w in &warnings {
        println!("WARN: {w}");
    }
    Ok(())
}
