//! Command-line interface: `profile`, `fit`, `bench`, and `simulate`.
//!
//! Every subcommand reads an optional JSON configuration file and applies
//! flag overrides on top (flags always win). The resolved configuration is
//! echoed into every output file next to a `schema_version` and the crate
//! version, so results stay self-describing.
//!
//! Configuration file shape (all sections optional unless the subcommand
//! needs them):
//!
//! ```text
//! {
//!   "session":  { "l_min": 0.1, "l_max": 4.0, "delta": 0.1,
//!                 "anchor_fraction": 0.05, "n_initial": 3, "max_steps": 8,
//!                 "strategy": "nms", "seed": 0,
//!                 "stopping": { "confidence_level": 0.95, "lambda": 0.1,
//!                                "min_samples": 30, "max_samples": 10000 } },
//!   "oracle":   { "type": "synthetic", "model": {...}, "sigma": 0.05 }
//!             | { "type": "trace", "path": "trace.csv" }
//!             | { "type": "command", "template": "run.sh --cpus {limit}",
//!                 "sample_timeout_seconds": 30.0 },
//!   "bench":    { "strategies": ["nms", "binary_search", "bayes_opt", "random"],
//!                 "repetitions": 10 },
//!   "simulate": { "samples_per_limit": 1000, "sigma": 0.05 }
//! }
//! ```
//!
//! Exit codes: 0 success; 2 configuration/input errors (bad JSON, invalid
//! fields, missing input files, malformed CSVs); 3 runtime failures (probe
//! errors, fit divergence, output I/O).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::model::{fit, ProfilePoint, RuntimeModel};
use crate::oracle::{load_trace, write_trace, CommandOracle, JobOracle, SyntheticOracle};
use crate::selection::StrategyKind;
use crate::session::{
    run_benchmark, run_session, BenchmarkReport, OracleFactory, ProfilingConfig, SessionError,
};

const SCHEMA_VERSION: u32 = 1;

/// CLI failures, split by who must fix them.
#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration or an input file is wrong — exit code 2.
    #[error("{0}")]
    Config(String),
    /// A valid plan failed while executing — exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

/// Entry point for the `limprof` binary; returns the process exit code.
pub fn main() -> i32 {
    match execute(std::env::args_os()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

// ─── Argument surface ───

#[derive(Debug, Parser)]
#[command(
    name = "limprof",
    version,
    about = "Profile how a stream job's per-sample runtime responds to CPU limits, \
             in as few probes as possible"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one profiling session and write session.json + model.json.
    Profile(ProfileArgs),
    /// Fit a runtime model to a CSV of (cpu_limit, mean_runtime) rows.
    Fit(FitArgs),
    /// Benchmark strategies against each other; write bench.json + CSVs.
    Bench(BenchArgs),
    /// Materialize a synthetic job into a replayable trace CSV.
    Simulate(SimulateArgs),
}

/// Overrides shared by the config-file-driven subcommands; every flag beats
/// the corresponding config-file field.
#[derive(Debug, Default, Args)]
struct Overrides {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Next-probe strategy: nms, binary_search, bayes_opt, or random.
    #[arg(long)]
    strategy: Option<String>,
    /// Anchor fraction p in (0, 1).
    #[arg(long)]
    anchor_fraction: Option<f64>,
    /// Initial parallel batch size (2–4).
    #[arg(long)]
    n_initial: Option<usize>,
    /// Total probe budget, including the initial batch.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Master seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum samples per probe.
    #[arg(long)]
    min_samples: Option<u64>,
    /// Maximum samples per probe.
    #[arg(long)]
    max_samples: Option<u64>,
    /// Early-stop when the CI is narrower than lambda × mean.
    #[arg(long)]
    lambda: Option<f64>,
    /// Confidence level of the per-probe interval.
    #[arg(long)]
    confidence: Option<f64>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for session.json and model.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also invert the final model at this per-sample runtime target.
    #[arg(long)]
    target_runtime: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with header cpu_limit,mean_runtime (one row per profiled limit).
    #[arg(long)]
    input: PathBuf,
    /// Directory for model.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for bench.json, smape_by_step.csv, time_by_step.csv, wins.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Repetitions per (config, strategy) cell.
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Trace CSV to write.
    #[arg(long, default_value = "trace.csv")]
    output: PathBuf,
    /// Samples to record per grid limit (≥ 2).
    #[arg(long)]
    samples_per_limit: Option<u64>,
    /// Lognormal noise scale (0 disables noise).
    #[arg(long)]
    sigma: Option<f64>,
}

// ─── Configuration file ───

/// On-disk configuration: the session itself plus oracle/bench/simulate
/// sections used by the subcommands that need them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub session: ProfilingConfig,
    pub oracle: Option<OracleConfig>,
    pub bench: Option<BenchSection>,
    pub simulate: Option<SimulateSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    /// Ground-truth model + lognormal noise.
    Synthetic {
        model: RuntimeModel,
        #[serde(default)]
        sigma: f64,
    },
    /// Replay a recorded trace CSV.
    Trace { path: PathBuf },
    /// Probe a real command ({limit} substituted, one runtime per line).
    Command {
        template: String,
        #[serde(default = "default_sample_timeout")]
        sample_timeout_seconds: f64,
    },
}

fn default_sample_timeout() -> f64 {
    30.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub strategies: Vec<StrategyKind>,
    pub repetitions: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { strategies: StrategyKind::ALL.to_vec(), repetitions: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub samples_per_limit: u64,
    pub sigma: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { samples_per_limit: 1000, sigma: 0.0 }
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))
}

/// Applies flag overrides on top of the file configuration.
fn resolve(mut file: FileConfig, overrides: &Overrides) -> Result<FileConfig, CliError> {
    if let Some(s) = &overrides.strategy {
        file.session.strategy = s
            .parse::<StrategyKind>()
            .map_err(|e| CliError::Config(format!("--strategy: {e}")))?;
    }
    if let Some(p) = overrides.anchor_fraction {
        file.session.anchor_fraction = p;
    }
    if let Some(n) = overrides.n_initial {
        file.session.n_initial = n;
    }
    if let Some(k) = overrides.max_steps {
        file.session.max_steps = k;
    }
    if let Some(seed) = overrides.seed {
        file.session.seed = seed;
    }
    if let Some(n) = overrides.min_samples {
        file.session.stopping.min_samples = n;
    }
    if let Some(n) = overrides.max_samples {
        file.session.stopping.max_samples = n;
    }
    if let Some(l) = overrides.lambda {
        file.session.stopping.lambda = l;
    }
    if let Some(c) = overrides.confidence {
        file.session.stopping.confidence_level = c;
    }
    file.session.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(file)
}

// ─── Dispatch ───

fn execute<I, T>(args: I) -> Result<i32, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(0);
        }
        Err(e) => {
            eprint!("{e}");
            return Ok(2);
        }
    };
    match cli.command {
        Cmd::Profile(args) => cmd_profile(args)?,
        Cmd::Fit(args) => cmd_fit(args)?,
        Cmd::Bench(args) => cmd_bench(args)?,
        Cmd::Simulate(args) => cmd_simulate(args)?,
    }
    Ok(0)
}

/// Splits session errors into "your configuration is wrong" (exit 2) versus
/// "the run itself failed" (exit 3).
fn classify_session_error(e: SessionError) -> CliError {
    match e {
        SessionError::InvalidConfig(_)
        | SessionError::GridMismatch { .. }
        | SessionError::Selection(_) => CliError::Config(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn build_oracle(
    config: &FileConfig,
) -> Result<(Box<dyn JobOracle>, Option<Vec<f64>>), CliError> {
    let oracle_cfg = config
        .oracle
        .as_ref()
        .ok_or_else(|| CliError::Config("config needs an \"oracle\" section".to_string()))?;
    let grid = config.session.grid().map_err(|e| CliError::Config(e.to_string()))?;
    match oracle_cfg {
        OracleConfig::Synthetic { model, sigma } => {
            let oracle = SyntheticOracle::new(*model, grid, *sigma, config.session.seed)
                .map_err(|e| CliError::Config(format!("oracle.model/oracle.sigma: {e}")))?;
            let reference = oracle.reference();
            Ok((Box::new(oracle), Some(reference)))
        }
        OracleConfig::Trace { path } => {
            let oracle = load_trace(path)
                .map_err(|e| CliError::Config(format!("trace file {}: {e}", path.display())))?;
            let reference = oracle.series_means();
            Ok((Box::new(oracle), Some(reference)))
        }
        OracleConfig::Command { template, sample_timeout_seconds } => {
            if !(*sample_timeout_seconds > 0.0 && sample_timeout_seconds.is_finite()) {
                return Err(CliError::Config(format!(
                    "oracle.sample_timeout_seconds must be positive, got {sample_timeout_seconds}"
                )));
            }
            let oracle = CommandOracle::new(
                template.clone(),
                grid,
                Duration::from_secs_f64(*sample_timeout_seconds),
            )
            .map_err(|e| CliError::Config(format!("oracle.template: {e}")))?;
            Ok((Box::new(oracle), None))
        }
    }
}

// ─── profile ───

fn cmd_profile(args: ProfileArgs) -> Result<(), CliError> {
    if let Some(t) = args.target_runtime {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!(
                "--target-runtime must be positive and finite, got {t}"
            )));
        }
    }
    let config = resolve(load_file_config(args.overrides.config.as_deref())?, &args.overrides)?;
    let (mut oracle, reference) = build_oracle(&config)?;
    let report = run_session(oracle.as_mut(), &config.session, reference.as_deref())
        .map_err(classify_session_error)?;

    let grid = config.session.grid().map_err(|e| CliError::Config(e.to_string()))?;
    let final_model = report.models.last().expect("sessions always fit at least one model");
    let requested_target = match args.target_runtime {
        Some(t) => {
            let inversion = final_model
                .model
                .invert(t, &grid)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Some(json!({
                "target_runtime": t,
                "recommended_limit": inversion.limit,
                "target_unreachable": inversion.target_unreachable,
            }))
        }
        None => None,
    };

    let config_json = config_json(&config)?;
    let session_path = args.out_dir.join("session.json");
    write_json(
        &session_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config_json,
            "session": report,
            "requested_target": requested_target,
        }),
    )?;
    let model_path = args.out_dir.join("model.json");
    write_json(&model_path, &model_envelope(&config_json, final_model.model, final_model.residual_norm, final_model.step)?)?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", session_path.display());
    println!("wrote {}", model_path.display());
    println!(
        "strategy={} probes={} total_time_seconds={}",
        report.strategy,
        report.probes.len(),
        report.total_time_seconds
    );
    println!(
        "target_limit={} target_runtime={}",
        report.target_limit, report.target_runtime
    );
    println!(
        "recommended_limit={} target_unreachable={}",
        report.recommended_limit, report.target_unreachable
    );
    if let Some(t) = &requested_target {
        println!(
            "requested_target_runtime={} recommended_limit={} target_unreachable={}",
            t["target_runtime"], t["recommended_limit"], t["target_unreachable"]
        );
    }
    Ok(())
}

// ─── fit ───

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let points = read_points_csv(&args.input)?;
    let outcome = fit(&points, None).map_err(|e| match e {
        crate::model::ModelError::FitDiverged { .. } => CliError::Runtime(e.to_string()),
        other => CliError::Config(format!("input file {}: {other}", args.input.display())),
    })?;

    let config_json = json!({ "input": args.input.display().to_string() });
    let envelope =
        model_envelope(&config_json, outcome.model, outcome.residual_norm, points.len())?;
    let model_path = args.out_dir.join("model.json");
    write_json(&model_path, &envelope)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&envelope)
            .map_err(|e| CliError::Runtime(e.to_string()))?
    );
    Ok(())
}

/// Reads the `fit` input CSV: header `cpu_limit,mean_runtime`, one row per
/// profiled limit.
fn read_points_csv(path: &Path) -> Result<Vec<ProfilePoint>, CliError> {
    let config_err =
        |msg: String| CliError::Config(format!("input file {}: {msg}", path.display()));
    let file = fs::File::open(path).map_err(|e| config_err(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let headers = reader.headers().map_err(|e| config_err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["cpu_limit", "mean_runtime"] {
        return Err(config_err(format!(
            "header must be \"cpu_limit,mean_runtime\", got {:?}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| config_err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(config_err(format!(
                "line {line}: expected 2 fields, got {}",
                record.len()
            )));
        }
        let limit: f64 = record[0]
            .parse()
            .map_err(|_| config_err(format!("line {line}: unparseable cpu_limit {:?}", &record[0])))?;
        let mean: f64 = record[1].parse().map_err(|_| {
            config_err(format!("line {line}: unparseable mean_runtime {:?}", &record[1]))
        })?;
        points.push(
            ProfilePoint::summary(limit, mean)
                .map_err(|e| config_err(format!("line {line}: {e}")))?,
        );
    }
    if points.is_empty() {
        return Err(config_err("no data rows".to_string()));
    }
    Ok(points)
}

// ─── bench ───

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let mut config = resolve(load_file_config(args.overrides.config.as_deref())?, &args.overrides)?;
    let mut bench = config.bench.clone().unwrap_or_default();
    if let Some(r) = args.repetitions {
        bench.repetitions = r;
    }
    config.bench = Some(bench.clone());

    let factory = bench_factory(&config)?;
    let report = run_benchmark(
        std::slice::from_ref(&config.session),
        &bench.strategies,
        bench.repetitions,
        config.session.seed,
        factory.as_ref(),
    )
    .map_err(classify_session_error)?;

    let config_json = config_json(&config)?;
    let bench_path = args.out_dir.join("bench.json");
    write_json(
        &bench_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config_json,
            "benchmark": report,
        }),
    )?;
    let smape_path = args.out_dir.join("smape_by_step.csv");
    let time_path = args.out_dir.join("time_by_step.csv");
    let wins_path = args.out_dir.join("wins.csv");
    write_step_csvs(&smape_path, &time_path, &wins_path, &report)?;

    for f in &report.failures {
        eprintln!("warning: cell failed: {f}");
    }
    for path in [&bench_path, &smape_path, &time_path, &wins_path] {
        println!("wrote {}", path.display());
    }
    for w in &report.wins {
        println!("strategy={} wins_0={} wins_10={}", w.strategy, w.wins_0, w.wins_10);
    }
    Ok(())
}

fn bench_factory(config: &FileConfig) -> Result<Box<OracleFactory<'static>>, CliError> {
    let oracle_cfg = config
        .oracle
        .as_ref()
        .ok_or_else(|| CliError::Config("config needs an \"oracle\" section".to_string()))?;
    match oracle_cfg {
        OracleConfig::Synthetic { model, sigma } => {
            let (model, sigma) = (*model, *sigma);
            Ok(Box::new(move |_ci, cell: &ProfilingConfig, oracle_seed| {
                let grid = cell.grid()?;
                let oracle = SyntheticOracle::new(model, grid, sigma, oracle_seed)?;
                let reference = oracle.reference();
                Ok((Box::new(oracle) as Box<dyn JobOracle>, Some(reference)))
            }))
        }
        OracleConfig::Trace { path } => {
            // Load once up front so schema errors surface as config errors,
            // then rewind a clone for every cell.
            let base = load_trace(path)
                .map_err(|e| CliError::Config(format!("trace file {}: {e}", path.display())))?;
            let reference = base.series_means();
            Ok(Box::new(move |_ci, _cell: &ProfilingConfig, _oracle_seed| {
                let mut oracle = base.clone();
                oracle.reset();
                Ok((Box::new(oracle) as Box<dyn JobOracle>, Some(reference.clone())))
            }))
        }
        OracleConfig::Command { template, sample_timeout_seconds } => {
            let grid = config.session.grid().map_err(|e| CliError::Config(e.to_string()))?;
            let oracle = CommandOracle::new(
                template.clone(),
                grid,
                Duration::from_secs_f64(*sample_timeout_seconds),
            )
            .map_err(|e| CliError::Config(format!("oracle.template: {e}")))?;
            Ok(Box::new(move |_ci, _cell: &ProfilingConfig, _oracle_seed| {
                Ok((Box::new(oracle.clone()) as Box<dyn JobOracle>, None))
            }))
        }
    }
}

fn write_step_csvs(
    smape_path: &Path,
    time_path: &Path,
    wins_path: &Path,
    report: &BenchmarkReport,
) -> Result<(), CliError> {
    let open = |path: &Path| {
        csv::Writer::from_path(path)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
    };
    let fail = |path: &Path, e: csv::Error| {
        CliError::Runtime(format!("writing {}: {e}", path.display()))
    };

    let mut smape_writer = open(smape_path)?;
    smape_writer
        .write_record(["config_index", "strategy", "repetition", "step", "smape"])
        .map_err(|e| fail(smape_path, e))?;
    for row in &report.rows {
        smape_writer
            .serialize((row.config_index, row.strategy.name(), row.repetition, row.step, row.smape))
            .map_err(|e| fail(smape_path, e))?;
    }
    smape_writer.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut time_writer = open(time_path)?;
    time_writer
        .write_record(["config_index", "strategy", "repetition", "step", "time_seconds"])
        .map_err(|e| fail(time_path, e))?;
    for row in &report.rows {
        time_writer
            .serialize((
                row.config_index,
                row.strategy.name(),
                row.repetition,
                row.step,
                row.cumulative_time_seconds,
            ))
            .map_err(|e| fail(time_path, e))?;
    }
    time_writer.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut wins_writer = open(wins_path)?;
    wins_writer
        .write_record(["strategy", "wins_0", "wins_10"])
        .map_err(|e| fail(wins_path, e))?;
    for w in &report.wins {
        wins_writer
            .serialize((w.strategy.name(), w.wins_0, w.wins_10))
            .map_err(|e| fail(wins_path, e))?;
    }
    wins_writer.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

// ─── simulate ───

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = resolve(load_file_config(args.overrides.config.as_deref())?, &args.overrides)?;
    let mut section = config.simulate.clone().unwrap_or_default();
    if let Some(n) = args.samples_per_limit {
        section.samples_per_limit = n;
    }
    if let Some(s) = args.sigma {
        section.sigma = s;
    }
    if section.samples_per_limit < 2 {
        return Err(CliError::Config(format!(
            "simulate.samples_per_limit must be at least 2, got {}",
            section.samples_per_limit
        )));
    }
    let Some(OracleConfig::Synthetic { model, .. }) = &config.oracle else {
        return Err(CliError::Config(
            "simulate needs an \"oracle\" section of type \"synthetic\"".to_string(),
        ));
    };

    let grid = config.session.grid().map_err(|e| CliError::Config(e.to_string()))?;
    let mut oracle = SyntheticOracle::new(*model, grid, section.sigma, config.session.seed)
        .map_err(|e| CliError::Config(format!("oracle.model/simulate.sigma: {e}")))?;
    let series = oracle.draw_series(section.samples_per_limit);

    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display())))?;
    }
    let file = fs::File::create(&args.output)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", args.output.display())))?;
    write_trace(std::io::BufWriter::new(file), &grid, &series)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", args.output.display())))?;

    let rows = grid.len() as u64 * section.samples_per_limit;
    println!("wrote {rows} rows to {}", args.output.display());
    Ok(())
}

// ─── Output plumbing ───

fn config_json(config: &FileConfig) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))
}

fn model_envelope(
    config_json: &serde_json::Value,
    model: RuntimeModel,
    residual_norm: f64,
    points_used: usize,
) -> Result<serde_json::Value, CliError> {
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_json,
        "model": model,
        "residual_norm": residual_norm,
        "points_used": points_used,
    }))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display())))?;
    }
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}
