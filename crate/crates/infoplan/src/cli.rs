//! Command-line entry points for the experiment harness.
//!
//! Four subcommands cover the batch workflows:
//!
//! * `run` — one experiment: load a TOML config (plus `--set key=value`
//!   overrides), execute the sampling loop, and write `results.csv`,
//!   `trajectories.csv`, and `manifest.json` into an output directory.
//! * `sweep` — the cross-product of planner/detector modes, contamination
//!   rates, and seeds, optionally parallel across runs, with per-run output
//!   directories and an aggregated `summary.csv` of RMSE-vs-samples curves.
//! * `copod-score` — score the rows of a free-standing numeric CSV with the
//!   outlier detector and append `score` and `flag` columns.
//! * `terrain` — generate a synthetic terrain raster as ESRI ASCII or CSV.
//!
//! # Output files
//!
//! `results.csv` has one row per epoch:
//! `epoch,seed,mode,rho,samples,rmse,n_filtered,n_false_alarms,n_missed`.
//! Floats are printed with Rust's shortest round-trip formatting, so two runs
//! with the same config and seed produce byte-identical files.
//!
//! `trajectories.csv` lists every pose at which a sample was taken:
//! `epoch,step,x1,x2,heading`.
//!
//! `manifest.json` echoes the complete effective config (defaults, file, and
//! overrides merged) as a TOML string, plus tool version and wall-clock
//! timing. Re-running with the echoed config reproduces `results.csv` byte
//! for byte.
//!
//! `summary.csv` (sweep only) holds one row per (mode, rho, sample count):
//! `mode,rho,samples,n_runs,rmse_mean,rmse_std`. Each run's RMSE curve is a
//! step function of its cumulative sample count; curves are evaluated at the
//! union of all observed counts by carrying the last value forward, then
//! averaged across seeds (`rmse_std` is the sample standard deviation, 0 for
//! a single run).
//!
//! # Exit codes
//!
//! 0 success · 1 I/O failure or a sweep with failed runs · 2 invalid
//! config/input · 3 numerical failure inside a run (message names the epoch).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;

use crate::config::{load_config, ConfigError, ExperimentConfig};
use crate::copod::{detect, fit_copod, score};
use crate::pipeline::{
    parse_mode_label, run_experiment, EpochRecord, ExperimentResult, PipelineError,
};
use crate::world::{synth_terrain, write_csv_grid, write_esri_ascii};

/// Labels accepted by `sweep --modes`, in canonical order.
pub const MODE_LABELS: [&str; 6] = [
    "uct-none",
    "uct-best",
    "uct-copod",
    "puct-copod",
    "uct-copod-hist",
    "puct-copod-hist",
];

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Malformed command-line input or input file contents.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Some sweep runs failed; details were already reported.
    #[error("{failed} of {total} sweep runs failed")]
    SweepFailures { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Pipeline(PipelineError::InvalidConfig(_)) => 2,
            CliError::Pipeline(_) => 3,
            CliError::Io { .. } | CliError::SweepFailures { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "infoplan",
    version,
    about = "Outlier-robust informative path planning: batch experiments, outlier scoring, terrain generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write results, trajectories, and a manifest.
    Run(RunArgs),
    /// Run the modes x rhos x seeds cross-product and aggregate RMSE curves.
    Sweep(SweepArgs),
    /// Score the rows of a numeric CSV with the copula outlier detector.
    CopodScore(CopodScoreArgs),
    /// Generate a synthetic terrain raster (ESRI ASCII or CSV).
    Terrain(TerrainArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config TOML; built-in defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set rho=0.05 --set search.iterations=200.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut overrides = Vec::with_capacity(self.set.len());
        for pair in &self.set {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                CliError::Input(format!("--set expects KEY=VALUE, got {pair:?}"))
            })?;
            overrides.push((key.to_string(), value.to_string()));
        }
        Ok(load_config(self.config.as_deref(), &overrides)?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Also dump every epoch's search tree to trees.json in the output directory.
    #[arg(long)]
    debug_tree: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; per-run results go to <out>/runs/<mode>/rho-<rho>/seed-<seed>/.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Comma-separated mode labels (planner-detector pairs).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "uct-none,uct-best,uct-copod,puct-copod"
    )]
    modes: Vec<String>,
    /// Comma-separated outlier contamination rates.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    rhos: Vec<f64>,
    /// Comma-separated seeds; a..b expands to the half-open integer range.
    #[arg(long, value_delimiter = ',', default_value = "0..10")]
    seeds: Vec<String>,
    /// Maximum experiments running in parallel (default: available cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CopodScoreArgs {
    /// Input CSV: one header row, then purely numeric rows.
    input: PathBuf,
    /// Fraction of rows expected to be outliers (sets the score threshold).
    #[arg(long, default_value_t = 0.1)]
    contamination: f64,
    /// Output CSV: the input columns plus `score` and `flag` (1 = outlier).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TerrainFormat {
    /// ESRI ASCII grid (.asc).
    Esri,
    /// Headerized CSV grid (.csv).
    Csv,
}

#[derive(Args)]
struct TerrainArgs {
    /// Terrain seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    cols: usize,
    /// Number of extra Gaussian bumps besides the central crater.
    #[arg(long, default_value_t = 6)]
    peaks: usize,
    /// Output path; .asc and .csv extensions choose the format automatically.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Raster format; required when the extension decides nothing.
    #[arg(long, value_enum)]
    format: Option<TerrainFormat>,
}

/// Parse `std::env::args_os` and dispatch; returns the process exit code.
pub fn main() -> ExitCode {
    run(std::env::args_os())
}

/// Like [`main`] but over explicit arguments, for tests and embedding.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints --help/--version to stdout (exit 0) and usage
            // errors to stderr (exit 2).
            let _ = err.print();
            return ExitCode::from(u8::try_from(err.exit_code()).unwrap_or(2));
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::CopodScore(args) => cmd_copod_score(&args),
        Command::Terrain(args) => cmd_terrain(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(err.exit_code())
        }
    }
}

// ---------------------------------------------------------------------------
// run

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut config = args.config.load()?;
    if args.debug_tree {
        config.record_trees = true;
    }
    let (world, pipeline) = config.build()?;
    let started = Instant::now();
    let result = run_experiment(&world, &pipeline)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_run_outputs(&args.out, &config, &result, elapsed)?;
    let last = result.records.last().expect("at least the pilot record");
    println!(
        "mode={} rho={} seed={}: {} epochs, {} samples, final rmse {:.6} ({:.1}s) -> {}",
        config.mode_label(),
        config.rho,
        config.seed,
        result.records.len() - 1,
        last.samples,
        last.rmse,
        elapsed,
        args.out.display(),
    );
    Ok(())
}

/// Everything `manifest.json` records about one finished run.
#[derive(Serialize)]
struct RunManifest<'a> {
    tool: ToolInfo,
    mode: &'a str,
    rho: f64,
    seed: u64,
    /// Complete effective config; feeding this back via --config reproduces
    /// `results.csv` byte for byte.
    config_toml: String,
    epochs: usize,
    final_rmse: f64,
    timing_seconds: f64,
    files: ManifestFiles,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

impl ToolInfo {
    fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Serialize)]
struct ManifestFiles {
    results: &'static str,
    trajectories: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    trees: Option<&'static str>,
}

/// Write `results.csv`, `trajectories.csv`, `manifest.json`, and (when tree
/// recording is on) `trees.json` into `dir`.
fn write_run_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
    timing_seconds: f64,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(
        &dir.join("results.csv"),
        &results_csv(&result.records, config),
    )?;
    write_file(
        &dir.join("trajectories.csv"),
        &trajectories_csv(&result.records),
    )?;
    if config.record_trees {
        let trees = format!("[{}]", result.tree_dumps.join(","));
        write_file(&dir.join("trees.json"), &trees)?;
    }
    let last = result.records.last().expect("at least the pilot record");
    let manifest = RunManifest {
        tool: ToolInfo::current(),
        mode: config.mode_label(),
        rho: config.rho,
        seed: config.seed,
        config_toml: config.to_toml_string(),
        epochs: result.records.len() - 1,
        final_rmse: last.rmse,
        timing_seconds,
        files: ManifestFiles {
            results: "results.csv",
            trajectories: "trajectories.csv",
            trees: config.record_trees.then_some("trees.json"),
        },
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join("manifest.json"), &json)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One row per epoch. Float columns use shortest round-trip formatting, so
/// identical runs yield identical bytes.
fn results_csv(records: &[EpochRecord], config: &ExperimentConfig) -> String {
    let mut out = String::from("epoch,seed,mode,rho,samples,rmse,n_filtered,n_false_alarms,n_missed\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.epoch,
            config.seed,
            config.mode_label(),
            config.rho,
            r.samples,
            r.rmse,
            r.n_filtered,
            r.n_false_alarms,
            r.n_missed,
        )
        .expect("string write");
    }
    out
}

fn trajectories_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,step,x1,x2,heading\n");
    for r in records {
        for (step, pose) in r.trajectory.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, step, pose.x1, pose.x2, pose.heading
            )
            .expect("string write");
        }
    }
    out
}

// ---------------------------------------------------------------------------
// sweep

struct SweepJob {
    mode: String,
    rho: f64,
    seed: u64,
}

enum JobOutcome {
    Ok(Vec<EpochRecord>),
    Failed(String),
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let base = args.config.load()?;
    if args.modes.is_empty() || args.rhos.is_empty() || args.seeds.is_empty() {
        return Err(CliError::Input(
            "sweep needs non-empty --modes, --rhos, and --seeds".into(),
        ));
    }
    for label in &args.modes {
        if parse_mode_label(label).is_none() {
            return Err(CliError::Input(format!(
                "unknown mode {label:?}; valid modes: {}",
                MODE_LABELS.join(", ")
            )));
        }
    }
    let seeds = parse_seed_list(&args.seeds)?;
    let jobs: Vec<SweepJob> = args
        .modes
        .iter()
        .flat_map(|mode| {
            let seeds = &seeds;
            args.rhos.iter().flat_map(move |&rho| {
                seeds.iter().map(move |&seed| SweepJob {
                    mode: mode.clone(),
                    rho,
                    seed,
                })
            })
        })
        .collect();
    let workers = args
        .jobs
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .clamp(1, jobs.len());

    let started = Instant::now();
    let next = AtomicUsize::new(0);
    let outcomes: Vec<Mutex<Option<JobOutcome>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_sweep_job(&args.out, &base, job);
                match &outcome {
                    JobOutcome::Ok(records) => {
                        let last = records.last().expect("pilot record");
                        println!(
                            "done mode={} rho={} seed={}: final rmse {:.6}",
                            job.mode, job.rho, job.seed, last.rmse
                        );
                    }
                    JobOutcome::Failed(message) => {
                        eprintln!(
                            "FAILED mode={} rho={} seed={}: {message}",
                            job.mode, job.rho, job.seed
                        );
                    }
                }
                *outcomes[i].lock().expect("outcome slot") = Some(outcome);
            });
        }
    });
    let outcomes: Vec<JobOutcome> = outcomes
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot").expect("worker filled slot"))
        .collect();
    let elapsed = started.elapsed().as_secs_f64();

    let summary = aggregate_sweep(&jobs, &outcomes);
    fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    write_file(&args.out.join("summary.csv"), &summary)?;

    let failures: Vec<SweepFailure> = jobs
        .iter()
        .zip(&outcomes)
        .filter_map(|(job, outcome)| match outcome {
            JobOutcome::Ok(_) => None,
            JobOutcome::Failed(message) => Some(SweepFailure {
                mode: job.mode.clone(),
                rho: job.rho,
                seed: job.seed,
                error: message.clone(),
            }),
        })
        .collect();
    let manifest = SweepManifest {
        tool: ToolInfo::current(),
        config_toml: base.to_toml_string(),
        modes: args.modes.clone(),
        rhos: args.rhos.clone(),
        seeds,
        jobs: workers,
        runs_total: jobs.len(),
        runs_failed: failures.len(),
        timing_seconds: elapsed,
        failures,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&args.out.join("manifest.json"), &json)?;

    let failed = manifest.runs_failed;
    println!(
        "sweep: {}/{} runs ok in {:.1}s -> {}",
        jobs.len() - failed,
        jobs.len(),
        elapsed,
        args.out.display()
    );
    if failed > 0 {
        return Err(CliError::SweepFailures {
            failed,
            total: jobs.len(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepManifest {
    tool: ToolInfo,
    /// The base config; each run overrides planner/detector mode, rho, seed.
    config_toml: String,
    modes: Vec<String>,
    rhos: Vec<f64>,
    seeds: Vec<u64>,
    jobs: usize,
    runs_total: usize,
    runs_failed: usize,
    timing_seconds: f64,
    failures: Vec<SweepFailure>,
}

#[derive(Serialize)]
struct SweepFailure {
    mode: String,
    rho: f64,
    seed: u64,
    error: String,
}

/// Expand seed tokens: `7` is a single seed, `0..10` the half-open range.
fn parse_seed_list(tokens: &[String]) -> Result<Vec<u64>, CliError> {
    let mut seeds = Vec::new();
    for token in tokens {
        if let Some((lo, hi)) = token.split_once("..") {
            let parse = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| CliError::Input(format!("bad seed range {token:?}")))
            };
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo >= hi {
                return Err(CliError::Input(format!(
                    "empty seed range {token:?} (use lo..hi with lo < hi)"
                )));
            }
            seeds.extend(lo..hi);
        } else {
            seeds.push(
                token
                    .parse::<u64>()
                    .map_err(|_| CliError::Input(format!("bad seed {token:?}")))?,
            );
        }
    }
    Ok(seeds)
}

fn run_sweep_job(out_root: &Path, base: &ExperimentConfig, job: &SweepJob) -> JobOutcome {
    let mut config = base.clone();
    let (planner, detector) = parse_mode_label(&job.mode).expect("validated above");
    config.planner_mode = planner;
    config.detector_mode = detector;
    config.rho = job.rho;
    config.seed = job.seed;
    let dir = out_root
        .join("runs")
        .join(&job.mode)
        .join(format!("rho-{}", job.rho))
        .join(format!("seed-{}", job.seed));
    let attempt = || -> Result<Vec<EpochRecord>, CliError> {
        let (world, pipeline) = config.build()?;
        let started = Instant::now();
        let result = run_experiment(&world, &pipeline)?;
        write_run_outputs(&dir, &config, &result, started.elapsed().as_secs_f64())?;
        Ok(result.records)
    };
    match attempt() {
        Ok(records) => JobOutcome::Ok(records),
        Err(err) => JobOutcome::Failed(err.to_string()),
    }
}

/// Build `summary.csv`: every run's RMSE step curve is sampled at the union
/// of the group's observed cumulative sample counts (carrying the last value
/// forward), then averaged across runs.
fn aggregate_sweep(jobs: &[SweepJob], outcomes: &[JobOutcome]) -> String {
    // Group in first-appearance order so the CSV follows the requested
    // mode/rho order.
    let mut group_keys: Vec<(String, f64)> = Vec::new();
    for job in jobs {
        if !group_keys
            .iter()
            .any(|(m, r)| *m == job.mode && r.to_bits() == job.rho.to_bits())
        {
            group_keys.push((job.mode.clone(), job.rho));
        }
    }
    let mut out = String::from("mode,rho,samples,n_runs,rmse_mean,rmse_std\n");
    for (mode, rho) in &group_keys {
        let runs: Vec<&Vec<EpochRecord>> = jobs
            .iter()
            .zip(outcomes)
            .filter(|(job, _)| job.mode == *mode && job.rho.to_bits() == rho.to_bits())
            .filter_map(|(_, outcome)| match outcome {
                JobOutcome::Ok(records) => Some(records),
                JobOutcome::Failed(_) => None,
            })
            .collect();
        if runs.is_empty() {
            continue;
        }
        let mut grid: Vec<usize> = runs
            .iter()
            .flat_map(|records| records.iter().map(|r| r.samples))
            .collect();
        grid.sort_unstable();
        grid.dedup();
        for &samples in &grid {
            let values: Vec<f64> = runs
                .iter()
                .filter_map(|records| carry_forward_rmse(records, samples))
                .collect();
            if values.is_empty() {
                continue;
            }
            writeln!(
                out,
                "{},{},{},{},{},{}",
                mode,
                rho,
                samples,
                values.len(),
                crate::stats::mean(&values),
                if values.len() > 1 {
                    crate::stats::sample_std(&values)
                } else {
                    0.0
                },
            )
            .expect("string write");
        }
    }
    out
}

/// RMSE of the last epoch with a cumulative sample count <= `samples`, or
/// None when the run has no record that early.
fn carry_forward_rmse(records: &[EpochRecord], samples: usize) -> Option<f64> {
    records
        .iter()
        .take_while(|r| r.samples <= samples)
        .last()
        .map(|r| r.rmse)
}

// ---------------------------------------------------------------------------
// copod-score

fn cmd_copod_score(args: &CopodScoreArgs) -> Result<(), CliError> {
    if !(args.contamination > 0.0 && args.contamination < 0.5) {
        return Err(CliError::Input(format!(
            "--contamination must lie in (0, 0.5), got {}",
            args.contamination
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&args.input)
        .map_err(|err| csv_input_error(&args.input, err))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|err| csv_input_error(&args.input, err))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no columns in header row",
            args.input.display()
        )));
    }
    let mut raw_rows: Vec<csv::StringRecord> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|err| csv_input_error(&args.input, err))?;
        // Data rows start on line 2, after the header.
        let line = i + 2;
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {line}, column {} ({}): not a number: {field:?}",
                    args.input.display(),
                    j + 1,
                    headers[j],
                ))
            })?;
            values.push(value);
        }
        raw_rows.push(record);
    }
    if raw_rows.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no data rows after the header",
            args.input.display()
        )));
    }
    let data = Array2::from_shape_vec((raw_rows.len(), headers.len()), values)
        .expect("row-major layout");
    let model = fit_copod(&data, args.contamination)
        .map_err(|err| CliError::Input(format!("{}: {err}", args.input.display())))?;
    let flags = detect(&model, &data).map_err(|err| CliError::Input(err.to_string()))?;

    let mut out = String::new();
    writeln!(out, "{},score,flag", headers.join(",")).expect("string write");
    for (row, flag) in raw_rows.iter().zip(&flags) {
        let point: Vec<f64> = row.iter().map(|f| f.parse().expect("validated")).collect();
        let s = score(&model, &point).expect("dims match the fit");
        let fields: Vec<&str> = row.iter().collect();
        writeln!(out, "{},{},{}", fields.join(","), s, u8::from(*flag)).expect("string write");
    }
    write_file(&args.out, &out)?;
    println!(
        "scored {} rows ({} columns): {} flagged at contamination {}, threshold {:.6} -> {}",
        raw_rows.len(),
        headers.len(),
        flags.iter().filter(|&&f| f).count(),
        args.contamination,
        model.threshold(),
        args.out.display(),
    );
    Ok(())
}

/// csv-crate errors carry the byte/line position; surface it as row/column.
fn csv_input_error(path: &Path, err: csv::Error) -> CliError {
    let location = match err.position() {
        Some(pos) => format!(" (line {})", pos.line()),
        None => String::new(),
    };
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            _ => unreachable!("is_io_error guarantees the Io kind"),
        }
    } else {
        CliError::Input(format!("{}{location}: {err}", path.display()))
    }
}

// ---------------------------------------------------------------------------
// terrain

fn cmd_terrain(args: &TerrainArgs) -> Result<(), CliError> {
    if args.rows < 2 || args.cols < 2 {
        return Err(CliError::Input(format!(
            "terrain must be at least 2x2, got {}x{}",
            args.rows, args.cols
        )));
    }
    if args.peaks < 1 {
        return Err(CliError::Input("--peaks must be at least 1".into()));
    }
    let format = match args.format {
        Some(format) => format,
        None => match args.out.extension().and_then(|e| e.to_str()) {
            Some("asc") => TerrainFormat::Esri,
            Some("csv") => TerrainFormat::Csv,
            _ => {
                return Err(CliError::Input(format!(
                    "cannot infer a format from {:?}; pass --format esri|csv",
                    args.out.display().to_string()
                )))
            }
        },
    };
    let grid = synth_terrain(args.seed, args.rows, args.cols, args.peaks);
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    match format {
        TerrainFormat::Esri => write_esri_ascii(&grid, &args.out),
        TerrainFormat::Csv => write_csv_grid(&grid, &args.out),
    }
    .map_err(|err| match err {
        crate::world::WorldError::Io(source) => CliError::Io {
            path: args.out.clone(),
            source,
        },
        other => CliError::Input(other.to_string()),
    })?;
    println!(
        "terrain seed={} {}x{} peaks={} -> {}",
        args.seed,
        args.rows,
        args.cols,
        args.peaks,
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: usize, samples: usize, rmse: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            samples,
            rmse,
            n_filtered: 0,
            n_false_alarms: 0,
            n_missed: 0,
            retried_after_terminal: false,
            trajectory: Vec::new(),
        }
    }

    #[test]
    fn seed_lists_mix_singles_and_ranges() {
        let seeds = parse_seed_list(&["3".into(), "10..13".into(), "7".into()]).unwrap();
        assert_eq!(seeds, vec![3, 10, 11, 12, 7]);
        assert!(parse_seed_list(&["5..5".into()]).is_err());
        assert!(parse_seed_list(&["x".into()]).is_err());
    }

    #[test]
    fn carry_forward_holds_the_last_rmse() {
        let records = vec![record(0, 60, 5.0), record(1, 75, 4.0), record(2, 90, 3.0)];
        assert_eq!(carry_forward_rmse(&records, 59), None);
        assert_eq!(carry_forward_rmse(&records, 60), Some(5.0));
        assert_eq!(carry_forward_rmse(&records, 89), Some(4.0));
        assert_eq!(carry_forward_rmse(&records, 10_000), Some(3.0));
    }

    #[test]
    fn aggregation_unions_grids_and_averages_across_runs() {
        let jobs = vec![
            SweepJob {
                mode: "uct-none".into(),
                rho: 0.1,
                seed: 0,
            },
            SweepJob {
                mode: "uct-none".into(),
                rho: 0.1,
                seed: 1,
            },
        ];
        let outcomes = vec![
            JobOutcome::Ok(vec![record(0, 60, 4.0), record(1, 80, 2.0)]),
            JobOutcome::Ok(vec![record(0, 60, 6.0), record(1, 90, 1.0)]),
        ];
        let csv = aggregate_sweep(&jobs, &outcomes);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "mode,rho,samples,n_runs,rmse_mean,rmse_std");
        // Grid is the union {60, 80, 90}; the second run carries 6.0 forward
        // at 80, the first carries 2.0 forward at 90.
        assert_eq!(lines[1], format!("uct-none,0.1,60,2,{},{}", 5.0, f64::sqrt(2.0)));
        assert_eq!(lines[2], format!("uct-none,0.1,80,2,{},{}", 4.0, f64::sqrt(8.0)));
        assert_eq!(lines[3], format!("uct-none,0.1,90,2,{},{}", 1.5, {
            let v: f64 = 0.5f64;
            (2.0 * v * v).sqrt()
        }));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn failed_runs_are_excluded_from_the_aggregate() {
        let jobs = vec![
            SweepJob {
                mode: "uct-best".into(),
                rho: 0.05,
                seed: 0,
            },
            SweepJob {
                mode: "uct-best".into(),
                rho: 0.05,
                seed: 1,
            },
        ];
        let outcomes = vec![
            JobOutcome::Failed("boom".into()),
            JobOutcome::Ok(vec![record(0, 60, 4.0)]),
        ];
        let csv = aggregate_sweep(&jobs, &outcomes);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "uct-best,0.05,60,1,4,0");
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn results_csv_is_stable_and_parseable() {
        let mut config = ExperimentConfig::default();
        config.seed = 9;
        config.rho = 0.05;
        let records = vec![record(0, 60, 4.25), record(1, 85, 3.5)];
        let csv = results_csv(&records, &config);
        assert_eq!(
            csv,
            "epoch,seed,mode,rho,samples,rmse,n_filtered,n_false_alarms,n_missed\n\
             0,9,puct-copod,0.05,60,4.25,0,0,0\n\
             1,9,puct-copod,0.05,85,3.5,0,0,0\n"
        );
    }
}
