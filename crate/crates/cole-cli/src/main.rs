//! Command-line front end for the pipeline.
//!
//! One binary, five subcommands: `transpile` turns architecture strings
//! into code text, `embed` fills an embedding cache, `cv` runs the
//! subsampled cross-validation protocol, `search` runs surrogate-assisted
//! search against a benchmark table, and `report` aggregates result rows.
//! Every run is driven by a versioned TOML config plus flag overrides and
//! writes its resolved configuration next to its outputs.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::{AcquisitionName, LossName, ModeName, OracleKind, ProviderKind, RunConfig, TaskName};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

/// Failures split by exit code: bad input (1) versus runtime trouble (2).
#[derive(Debug)]
pub enum CliError {
    /// The request itself is invalid: unparseable input, bad config,
    /// out-of-range settings. Exit code 1.
    Input(String),
    /// The request was valid but execution failed: I/O, transport,
    /// diverging training. Exit code 2.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<cole_core::Error> for CliError {
    fn from(err: cole_core::Error) -> CliError {
        use cole_core::Error::*;
        match err {
            Parse(_) | Transpile(_) | InvalidInput(_) | Benchmark(_) | Degenerate(_) => {
                CliError::Input(err.to_string())
            }
            Provider(_) | Transport { .. } | NonFiniteLoss { .. } | Io(_) | Json(_) | Csv(_) => {
                CliError::Runtime(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Runtime(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> CliError {
        CliError::Runtime(err.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cole",
    version,
    about = "Code-representation pipeline for architecture search"
)]
struct Cli {
    /// TOML run configuration; flags override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap for data-parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory override.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn architecture strings or a derivation tree into code text.
    Transpile(TranspileArgs),
    /// Embed code texts for architecture strings into a cache file.
    Embed(EmbedArgs),
    /// Run the stratified subsampled cross-validation protocol.
    Cv(CvArgs),
    /// Run surrogate-assisted search trials against a benchmark table.
    Search(SearchArgs),
    /// Aggregate a results CSV into summary tables.
    Report(ReportArgs),
}

#[derive(clap::Args, Debug)]
struct TranspileArgs {
    /// Input file: one architecture string per line, or one derivation tree.
    input: PathBuf,

    /// Treat the input as a whole-file derivation tree.
    #[arg(long)]
    tree: bool,

    /// Helper verbosity mode override.
    #[arg(long, value_enum)]
    mode: Option<ModeName>,

    /// Prepend the macro-skeleton backbone.
    #[arg(long)]
    backbone: bool,

    /// Prepend the task docstring.
    #[arg(long)]
    comment: bool,

    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Emit JSON lines even for a single input.
    #[arg(long)]
    jsonl: bool,

    /// Report per-line failures and keep going instead of stopping.
    #[arg(long)]
    continue_on_error: bool,
}

#[derive(clap::Args, Debug)]
struct EmbedArgs {
    /// Architecture strings, one per line.
    input: PathBuf,

    /// Embedding cache to consult and fill.
    #[arg(long)]
    cache: Option<PathBuf>,

    /// Provider override.
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,

    /// Embedding dimension override.
    #[arg(long)]
    dim: Option<usize>,

    /// Helper verbosity mode override.
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
}

#[derive(clap::Args, Debug)]
struct CvArgs {
    /// Budget list override, e.g. --budgets 14,55.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,

    /// Trial seed count override.
    #[arg(long)]
    seeds: Option<usize>,

    /// Target task override.
    #[arg(long, value_enum)]
    task: Option<TaskName>,

    /// Provider override.
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,

    /// Config label override for result rows.
    #[arg(long)]
    config_name: Option<String>,

    /// Loss override.
    #[arg(long, value_enum)]
    loss: Option<LossName>,

    /// PCA component count override (0 disables).
    #[arg(long)]
    pca: Option<usize>,

    /// Record wall-clock seconds per trial.
    #[arg(long)]
    record_timing: bool,
}

#[derive(clap::Args, Debug)]
struct SearchArgs {
    /// Representation arms to run; repeat for a two-arm comparison.
    #[arg(long = "representation", value_enum)]
    representations: Vec<commands::Representation>,

    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,

    /// Evaluation budget override.
    #[arg(long)]
    budget: Option<usize>,

    /// Target task override.
    #[arg(long, value_enum)]
    task: Option<TaskName>,

    /// Oracle kind override.
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,

    /// Benchmark CSV path (implies --oracle csv).
    #[arg(long)]
    benchmark: Option<PathBuf>,

    /// Acquisition override.
    #[arg(long, value_enum)]
    acquisition: Option<AcquisitionName>,

    /// Threshold percentage override for the evals-to-threshold summary.
    #[arg(long)]
    pct: Option<f64>,

    /// Interpret the threshold as absolute accuracy points.
    #[arg(long)]
    absolute: bool,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    /// Trial-level results CSV produced by `cv`.
    results: PathBuf,
}

fn main() -> ExitCode {
    // Usage errors from clap itself belong to exit code 1; clap's default
    // (2) is reserved here for runtime failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(jobs) = cli.jobs {
        cole_core::par::set_max_threads(jobs).map_err(CliError::Input)?;
    }

    match cli.command {
        Command::Transpile(args) => commands::transpile(config, args),
        Command::Embed(args) => commands::embed(config, args),
        Command::Cv(args) => commands::cv(config, args),
        Command::Search(args) => commands::search(config, args),
        Command::Report(args) => commands::report(config, args),
    }
}
