//! `countproc`: batch fitting and benchmarking of rounded count-process
//! models.
//!
//! Every subcommand is deterministic given its resolved options: output
//! files embed the seed and a hash of the configuration, and rerunning a
//! command reproduces its files byte for byte. Timing goes to stderr so
//! captured stdout and the files stay reproducible. Exit codes: 0 on
//! success, 1 for input, configuration, or numerical errors, 2 for command
//! line usage errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use countproc_cli::commands::{
    self, BenchmarkFlags, BenchmarkOptions, FitAdditiveFlags, FitAdditiveOptions, FitGpFlags,
    FitGpOptions, FitGroupedFlags, FitGroupedOptions, FitPsplineFlags, FitPsplineOptions,
    SimulateFlags, SimulateOptions,
};
use countproc_cli::config::Resolver;
use countproc_cli::{CliError, Result};

/// Environment variable bounding the worker threads parallel commands use.
const THREADS_VAR: &str = "COUNTPROC_THREADS";

#[derive(Parser)]
#[command(
    name = "countproc",
    version,
    about = "Rounded stochastic-process models for count data",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every model command shares.
#[derive(Args)]
struct CommonArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Flat key=value configuration file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory output files are written into (created if missing).
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Output file-name prefix.
    #[arg(long)]
    prefix: Option<String>,
}

impl CommonArgs {
    fn resolver(&self) -> Result<Resolver> {
        match &self.config {
            Some(path) => Resolver::from_file(path),
            None => Ok(Resolver::empty()),
        }
    }

    fn prefix(&self, default: &str) -> String {
        self.prefix.clone().unwrap_or_else(|| default.to_string())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the rounded Gaussian-process model to a count series.
    FitGp {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: FitGpFlags,
    },
    /// Fit the rounded penalized-spline model to a count series.
    FitPspline {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: FitPsplineFlags,
    },
    /// Fit per-group spline curves with subject random effects.
    FitGrouped {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: FitGroupedFlags,
    },
    /// Fit the additive covariate model with autocorrelated errors.
    FitAdditive {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        flags: FitAdditiveFlags,
    },
    /// Draw one replicate of a benchmark scenario as a count-series CSV.
    Simulate {
        /// Flat key=value configuration file; explicit flags take
        /// precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory the file is written into (created if missing).
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Output file-name prefix.
        #[arg(long)]
        prefix: Option<String>,
        #[command(flatten)]
        flags: SimulateFlags,
    },
    /// Score every method against every scenario on simulated data.
    Benchmark {
        /// Flat key=value configuration file; explicit flags take
        /// precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory output files are written into (created if missing).
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Output file-name prefix.
        #[arg(long, default_value = "benchmark")]
        prefix: String,
        #[command(flatten)]
        flags: BenchmarkFlags,
    },
    /// Recompute the summary table of a draws file.
    Summarize {
        /// Draws CSV written by a fit command.
        #[arg(long)]
        input: PathBuf,
        /// Directory the summary is written into (created if missing).
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Output file-name prefix (defaults to the input's stem).
        #[arg(long)]
        prefix: Option<String>,
    },
}

/// Applies the thread bound before any parallel work starts.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
        CliError::Input(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("could not size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::FitGp { common, flags } => {
            let opts = FitGpOptions::resolve(common.resolver()?, &flags)?;
            commands::run_fit_gp(&common.input, &common.output_dir, &common.prefix("gp"), &opts)
        }
        Command::FitPspline { common, flags } => {
            let opts = FitPsplineOptions::resolve(common.resolver()?, &flags)?;
            commands::run_fit_pspline(
                &common.input,
                &common.output_dir,
                &common.prefix("pspline"),
                &opts,
            )
        }
        Command::FitGrouped { common, flags } => {
            let opts = FitGroupedOptions::resolve(common.resolver()?, &flags)?;
            commands::run_fit_grouped(
                &common.input,
                &common.output_dir,
                &common.prefix("grouped"),
                &opts,
            )
        }
        Command::FitAdditive { common, flags } => {
            let opts = FitAdditiveOptions::resolve(common.resolver()?, &flags)?;
            commands::run_fit_additive(
                &common.input,
                &common.output_dir,
                &common.prefix("additive"),
                &opts,
            )
        }
        Command::Simulate {
            config,
            output_dir,
            prefix,
            flags,
        } => {
            let resolver = match &config {
                Some(path) => Resolver::from_file(path)?,
                None => Resolver::empty(),
            };
            let opts = SimulateOptions::resolve(resolver, &flags)?;
            let prefix = prefix.unwrap_or_else(|| opts.default_prefix());
            commands::run_simulate(&output_dir, &prefix, &opts)
        }
        Command::Benchmark {
            config,
            output_dir,
            prefix,
            flags,
        } => {
            let resolver = match &config {
                Some(path) => Resolver::from_file(path)?,
                None => Resolver::empty(),
            };
            let opts = BenchmarkOptions::resolve(resolver, &flags)?;
            commands::run_benchmark(&output_dir, &prefix, &opts)
        }
        Command::Summarize {
            input,
            output_dir,
            prefix,
        } => commands::run_summarize(&input, &output_dir, prefix.as_deref()),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = Cli::parse();
    if let Err(err) = init_threads() {
        eprintln!("error: {err}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            eprintln!("completed in {:.3}s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
