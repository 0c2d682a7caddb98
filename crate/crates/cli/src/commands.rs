//! One entry point per subcommand.
//!
//! Each subcommand owns two structs: a `*Flags` struct holding the raw
//! command-line values (every field optional, so the binary can flatten it
//! into its argument parser), and a resolved `*Options` struct produced by
//! [`Resolver`] merging flags, configuration file, and defaults. The
//! resolved options render canonically into the configuration hash embedded
//! in every output file, and the `run_*` functions return the paths they
//! wrote.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use countproc_core::diagnostics::quantile;
use countproc_core::gp::{gp_fit, gp_predict_pointwise, GpConfig};
use countproc_core::hier::{
    fit_additive_ar1, fit_grouped, group_burden_summaries, predictor_effect_curve,
    AdditiveConfig, GroupedConfig, N_PREDICTORS,
};
use countproc_core::predict::{count_quantile_series, posterior_median_series};
use countproc_core::simbench::{
    generate, run_benchmark as run_benchmark_harness, scenario_data_stream, subsample_equispaced,
    benchmark_grid, BenchmarkConfig, Method, Scenario,
};
use countproc_core::spline::{rpspline_fit, rpspline_predict, RpsplineConfig};
use countproc_core::RngStream;

use crate::config::{config_hash, Resolver};
use crate::table::{fmt_float, parse_count_series, parse_functional, write_table, DrawTable};
use crate::{CliError, Result};

/// Derivation tag separating each command's prediction stream from its fit
/// stream.
const PREDICT_STREAM: u64 = 1;

/// Inclusive equispaced grid of `n >= 2` points over `[lo, hi]`. The last
/// point is pinned to `hi` exactly so grids never stray past an observed
/// range through rounding.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Creates the output directory and joins a file name into it.
fn prepare_output(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.join(name))
}

/// Refuses to write over the input file. Output paths that do not exist yet
/// cannot be the input (which was just read), so only existing files are
/// compared.
fn guard_not_input(input: &Path, output: &Path) -> Result<()> {
    if let (Ok(a), Ok(b)) = (input.canonicalize(), output.canonicalize()) {
        if a == b {
            return Err(CliError::input(format!(
                "refusing to overwrite the input file {}",
                input.display()
            )));
        }
    }
    Ok(())
}

/// Splits a comma-separated option into parsed, duplicate-free entries.
fn parse_list<T>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T: FromStr + PartialEq,
    T::Err: Display,
{
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(CliError::input(format!("empty entry in {what} list {raw:?}")));
        }
        let value: T = part
            .parse()
            .map_err(|e| CliError::input(format!("{what} list {raw:?}: {e}")))?;
        if out.contains(&value) {
            return Err(CliError::input(format!(
                "duplicate entry {part:?} in {what} list"
            )));
        }
        out.push(value);
    }
    Ok(out)
}

fn join_list<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------------------
// fit-gp

/// Command-line values for `fit-gp`; `None` means the flag was not given.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct FitGpFlags {
    /// Kept post-burn-in iterations.
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// Discarded warm-up iterations.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every thin-th post-burn-in iteration.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Top-level RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gamma prior shape on the inverse process scale.
    #[arg(long)]
    pub a_tau1: Option<f64>,
    /// Gamma prior rate on the inverse process scale.
    #[arg(long)]
    pub b_tau1: Option<f64>,
    /// Gamma prior shape on the transformed bandwidth.
    #[arg(long)]
    pub a_tau2: Option<f64>,
    /// Gamma prior rate on the transformed bandwidth.
    #[arg(long)]
    pub b_tau2: Option<f64>,
    /// Power of the bandwidth the gamma prior applies to.
    #[arg(long)]
    pub tau2_power: Option<f64>,
    /// Starting process scale.
    #[arg(long)]
    pub init_tau1: Option<f64>,
    /// Starting bandwidth.
    #[arg(long)]
    pub init_tau2: Option<f64>,
    /// Update the bandwidth only on every k-th iteration.
    #[arg(long)]
    pub tau2_update_every: Option<usize>,
    /// Points in the plot grid spanning the data range.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

/// Resolved `fit-gp` options.
#[derive(Debug, Clone, PartialEq)]
pub struct FitGpOptions {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub a_tau1: f64,
    pub b_tau1: f64,
    pub a_tau2: f64,
    pub b_tau2: f64,
    pub tau2_power: f64,
    pub init_tau1: f64,
    pub init_tau2: f64,
    pub tau2_update_every: usize,
    pub grid_points: usize,
}

impl FitGpOptions {
    pub fn resolve(mut r: Resolver, f: &FitGpFlags) -> Result<Self> {
        let d = GpConfig::default();
        let opts = FitGpOptions {
            n_iter: r.take("n_iter", f.n_iter, d.n_iter)?,
            burn_in: r.take("burn_in", f.burn_in, d.burn_in)?,
            thin: r.take("thin", f.thin, d.thin)?,
            seed: r.take("seed", f.seed, d.seed)?,
            a_tau1: r.take("a_tau1", f.a_tau1, d.a_tau1)?,
            b_tau1: r.take("b_tau1", f.b_tau1, d.b_tau1)?,
            a_tau2: r.take("a_tau2", f.a_tau2, d.a_tau2)?,
            b_tau2: r.take("b_tau2", f.b_tau2, d.b_tau2)?,
            tau2_power: r.take("tau2_power", f.tau2_power, d.tau2_power)?,
            init_tau1: r.take("init_tau1", f.init_tau1, d.init_tau1)?,
            init_tau2: r.take("init_tau2", f.init_tau2, d.init_tau2)?,
            tau2_update_every: r.take("tau2_update_every", f.tau2_update_every, d.tau2_update_every)?,
            grid_points: r.take("grid_points", f.grid_points, 200)?,
        };
        r.finish()?;
        opts.check_grid_points()?;
        Ok(opts)
    }

    fn check_grid_points(&self) -> Result<()> {
        check_grid_points(self.grid_points)
    }

    fn canonical_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_iter", self.n_iter.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("seed", self.seed.to_string()),
            ("a_tau1", self.a_tau1.to_string()),
            ("b_tau1", self.b_tau1.to_string()),
            ("a_tau2", self.a_tau2.to_string()),
            ("b_tau2", self.b_tau2.to_string()),
            ("tau2_power", self.tau2_power.to_string()),
            ("init_tau1", self.init_tau1.to_string()),
            ("init_tau2", self.init_tau2.to_string()),
            ("tau2_update_every", self.tau2_update_every.to_string()),
            ("grid_points", self.grid_points.to_string()),
        ]
    }

    pub fn hash(&self) -> String {
        config_hash("fit-gp", &self.canonical_entries())
    }

    fn gp_config(&self) -> GpConfig {
        GpConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            a_tau1: self.a_tau1,
            b_tau1: self.b_tau1,
            a_tau2: self.a_tau2,
            b_tau2: self.b_tau2,
            tau2_power: self.tau2_power,
            init_tau1: self.init_tau1,
            init_tau2: self.init_tau2,
            tau2_update_every: self.tau2_update_every,
            ..GpConfig::default()
        }
    }
}

fn check_grid_points(n: usize) -> Result<()> {
    if n < 2 {
        return Err(CliError::input(format!(
            "grid_points must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// Fits the rounded Gaussian-process model and writes draws, summary, and a
/// count-scale plot band.
pub fn run_fit_gp(
    input: &Path,
    output_dir: &Path,
    prefix: &str,
    opts: &FitGpOptions,
) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let series = parse_count_series(&text, &input.display().to_string())?;
    let draws = gp_fit(&series, &opts.gp_config())?;

    let hash = opts.hash();
    let table = DrawTable::new(
        hash.clone(),
        opts.seed,
        vec![
            ("tau1".to_string(), draws.tau1().to_vec()),
            ("tau2".to_string(), draws.tau2().to_vec()),
        ],
    )?;

    let lo = series.locations()[0];
    let hi = *series.locations().last().expect("non-empty series");
    let grid = linspace(lo, hi, opts.grid_points);
    let pred_seed = RngStream::new(opts.seed).derive(PREDICT_STREAM).seed();
    let preds = gp_predict_pointwise(&draws, &grid, pred_seed)?;
    let median = posterior_median_series(&preds)?;
    let lower = count_quantile_series(&preds, 0.025)?;
    let upper = count_quantile_series(&preds, 0.975)?;

    let draws_path = prepare_output(output_dir, &format!("{prefix}_draws.csv"))?;
    let summary_path = prepare_output(output_dir, &format!("{prefix}_summary.csv"))?;
    let plot_path = prepare_output(output_dir, &format!("{prefix}_plot.csv"))?;
    for path in [&draws_path, &summary_path, &plot_path] {
        guard_not_input(input, path)?;
    }
    table.write(&draws_path)?;
    table.write_summary(&summary_path)?;
    write_table(
        &plot_path,
        &hash,
        opts.seed,
        &["s", "median", "lower", "upper"],
        grid.iter().enumerate().map(|(i, &s)| {
            vec![
                fmt_float(s),
                median[i].to_string(),
                lower[i].to_string(),
                upper[i].to_string(),
            ]
        }),
    )?;
    Ok(vec![draws_path, summary_path, plot_path])
}

// ---------------------------------------------------------------------------
// fit-pspline

/// Command-line values for `fit-pspline`.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct FitPsplineFlags {
    /// Kept post-burn-in iterations.
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// Discarded warm-up iterations.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every thin-th post-burn-in iteration.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Top-level RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interior knots of the cubic B-spline basis.
    #[arg(long)]
    pub n_interior_knots: Option<usize>,
    /// Order of the difference penalty.
    #[arg(long)]
    pub penalty_order: Option<usize>,
    /// Degrees of freedom of the smoothing-weight prior.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Gamma prior shape on the smoothing-weight rate.
    #[arg(long)]
    pub a_delta: Option<f64>,
    /// Gamma prior rate on the smoothing-weight rate.
    #[arg(long)]
    pub b_delta: Option<f64>,
    /// Starting error precision.
    #[arg(long)]
    pub init_tau: Option<f64>,
    /// Starting smoothing weight.
    #[arg(long)]
    pub init_lambda: Option<f64>,
    /// Starting smoothing-weight rate.
    #[arg(long)]
    pub init_delta: Option<f64>,
    /// Points in the plot grid spanning the data range.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

/// Resolved `fit-pspline` options.
#[derive(Debug, Clone, PartialEq)]
pub struct FitPsplineOptions {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_interior_knots: usize,
    pub penalty_order: usize,
    pub nu: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    pub init_tau: f64,
    pub init_lambda: f64,
    pub init_delta: f64,
    pub grid_points: usize,
}

impl FitPsplineOptions {
    pub fn resolve(mut r: Resolver, f: &FitPsplineFlags) -> Result<Self> {
        let d = RpsplineConfig::default();
        let opts = FitPsplineOptions {
            n_iter: r.take("n_iter", f.n_iter, d.n_iter)?,
            burn_in: r.take("burn_in", f.burn_in, d.burn_in)?,
            thin: r.take("thin", f.thin, d.thin)?,
            seed: r.take("seed", f.seed, d.seed)?,
            n_interior_knots: r.take("n_interior_knots", f.n_interior_knots, d.n_interior_knots)?,
            penalty_order: r.take("penalty_order", f.penalty_order, d.penalty_order)?,
            nu: r.take("nu", f.nu, d.nu)?,
            a_delta: r.take("a_delta", f.a_delta, d.a_delta)?,
            b_delta: r.take("b_delta", f.b_delta, d.b_delta)?,
            init_tau: r.take("init_tau", f.init_tau, d.init_tau)?,
            init_lambda: r.take("init_lambda", f.init_lambda, d.init_lambda)?,
            init_delta: r.take("init_delta", f.init_delta, d.init_delta)?,
            grid_points: r.take("grid_points", f.grid_points, 200)?,
        };
        r.finish()?;
        check_grid_points(opts.grid_points)?;
        Ok(opts)
    }

    fn canonical_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_iter", self.n_iter.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("seed", self.seed.to_string()),
            ("n_interior_knots", self.n_interior_knots.to_string()),
            ("penalty_order", self.penalty_order.to_string()),
            ("nu", self.nu.to_string()),
            ("a_delta", self.a_delta.to_string()),
            ("b_delta", self.b_delta.to_string()),
            ("init_tau", self.init_tau.to_string()),
            ("init_lambda", self.init_lambda.to_string()),
            ("init_delta", self.init_delta.to_string()),
            ("grid_points", self.grid_points.to_string()),
        ]
    }

    pub fn hash(&self) -> String {
        config_hash("fit-pspline", &self.canonical_entries())
    }

    fn rpspline_config(&self) -> RpsplineConfig {
        RpsplineConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            n_interior_knots: self.n_interior_knots,
            penalty_order: self.penalty_order,
            nu: self.nu,
            a_delta: self.a_delta,
            b_delta: self.b_delta,
            init_tau: self.init_tau,
            init_lambda: self.init_lambda,
            init_delta: self.init_delta,
            ..RpsplineConfig::default()
        }
    }
}

/// Fits the rounded penalized-spline model and writes draws, summary, and a
/// count-scale plot band.
pub fn run_fit_pspline(
    input: &Path,
    output_dir: &Path,
    prefix: &str,
    opts: &FitPsplineOptions,
) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let series = parse_count_series(&text, &input.display().to_string())?;
    let draws = rpspline_fit(&series, &opts.rpspline_config())?;

    let hash = opts.hash();
    let mut columns = vec![
        ("tau".to_string(), draws.tau().to_vec()),
        ("lambda".to_string(), draws.lambda().to_vec()),
        ("delta".to_string(), draws.delta().to_vec()),
    ];
    let n_basis = draws.basis().n_basis();
    for j in 0..n_basis {
        columns.push((
            format!("theta_{j}"),
            draws.theta().iter().map(|t| t[j]).collect(),
        ));
    }
    let table = DrawTable::new(hash.clone(), opts.seed, columns)?;

    let lo = series.locations()[0];
    let hi = *series.locations().last().expect("non-empty series");
    let grid = linspace(lo, hi, opts.grid_points);
    let pred_seed = RngStream::new(opts.seed).derive(PREDICT_STREAM).seed();
    let preds = rpspline_predict(&draws, &grid, pred_seed)?;
    let median = posterior_median_series(&preds)?;
    let lower = count_quantile_series(&preds, 0.025)?;
    let upper = count_quantile_series(&preds, 0.975)?;

    let draws_path = prepare_output(output_dir, &format!("{prefix}_draws.csv"))?;
    let summary_path = prepare_output(output_dir, &format!("{prefix}_summary.csv"))?;
    let plot_path = prepare_output(output_dir, &format!("{prefix}_plot.csv"))?;
    for path in [&draws_path, &summary_path, &plot_path] {
        guard_not_input(input, path)?;
    }
    table.write(&draws_path)?;
    table.write_summary(&summary_path)?;
    write_table(
        &plot_path,
        &hash,
        opts.seed,
        &["s", "median", "lower", "upper"],
        grid.iter().enumerate().map(|(i, &s)| {
            vec![
                fmt_float(s),
                median[i].to_string(),
                lower[i].to_string(),
                upper[i].to_string(),
            ]
        }),
    )?;
    Ok(vec![draws_path, summary_path, plot_path])
}

// ---------------------------------------------------------------------------
// fit-grouped

/// Command-line values for `fit-grouped`.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct FitGroupedFlags {
    /// Kept post-burn-in iterations.
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// Discarded warm-up iterations.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every thin-th post-burn-in iteration.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Top-level RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interior knots of each group's cubic B-spline.
    #[arg(long)]
    pub n_interior_knots: Option<usize>,
    /// Order of the difference penalty.
    #[arg(long)]
    pub penalty_order: Option<usize>,
    /// Degrees of freedom of the smoothing-weight prior.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Gamma prior shape on the smoothing-weight rate.
    #[arg(long)]
    pub a_delta: Option<f64>,
    /// Gamma prior rate on the smoothing-weight rate.
    #[arg(long)]
    pub b_delta: Option<f64>,
    /// Dirichlet-process concentration for the subject effects.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Gamma prior shape on the base-measure precision.
    #[arg(long)]
    pub a_psi: Option<f64>,
    /// Gamma prior rate on the base-measure precision.
    #[arg(long)]
    pub b_psi: Option<f64>,
    /// Starting error precision.
    #[arg(long)]
    pub init_tau: Option<f64>,
    /// Starting smoothing weight.
    #[arg(long)]
    pub init_lambda: Option<f64>,
    /// Starting smoothing-weight rate.
    #[arg(long)]
    pub init_delta: Option<f64>,
    /// Starting base-measure precision.
    #[arg(long)]
    pub init_psi: Option<f64>,
    /// Pin every subject effect at zero (true/false).
    #[arg(long, value_name = "BOOL")]
    pub no_random_effects: Option<bool>,
    /// Points in the plot grid spanning the data range.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

/// Resolved `fit-grouped` options.
#[derive(Debug, Clone, PartialEq)]
pub struct FitGroupedOptions {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_interior_knots: usize,
    pub penalty_order: usize,
    pub nu: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    pub alpha: f64,
    pub a_psi: f64,
    pub b_psi: f64,
    pub init_tau: f64,
    pub init_lambda: f64,
    pub init_delta: f64,
    pub init_psi: f64,
    pub no_random_effects: bool,
    pub grid_points: usize,
}

impl FitGroupedOptions {
    pub fn resolve(mut r: Resolver, f: &FitGroupedFlags) -> Result<Self> {
        let d = GroupedConfig::default();
        let opts = FitGroupedOptions {
            n_iter: r.take("n_iter", f.n_iter, d.n_iter)?,
            burn_in: r.take("burn_in", f.burn_in, d.burn_in)?,
            thin: r.take("thin", f.thin, d.thin)?,
            seed: r.take("seed", f.seed, d.seed)?,
            n_interior_knots: r.take("n_interior_knots", f.n_interior_knots, d.n_interior_knots)?,
            penalty_order: r.take("penalty_order", f.penalty_order, d.penalty_order)?,
            nu: r.take("nu", f.nu, d.nu)?,
            a_delta: r.take("a_delta", f.a_delta, d.a_delta)?,
            b_delta: r.take("b_delta", f.b_delta, d.b_delta)?,
            alpha: r.take("alpha", f.alpha, d.alpha)?,
            a_psi: r.take("a_psi", f.a_psi, d.a_psi)?,
            b_psi: r.take("b_psi", f.b_psi, d.b_psi)?,
            init_tau: r.take("init_tau", f.init_tau, d.init_tau)?,
            init_lambda: r.take("init_lambda", f.init_lambda, d.init_lambda)?,
            init_delta: r.take("init_delta", f.init_delta, d.init_delta)?,
            init_psi: r.take("init_psi", f.init_psi, d.init_psi)?,
            no_random_effects: r.take("no_random_effects", f.no_random_effects, false)?,
            grid_points: r.take("grid_points", f.grid_points, 200)?,
        };
        r.finish()?;
        check_grid_points(opts.grid_points)?;
        Ok(opts)
    }

    fn canonical_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_iter", self.n_iter.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("seed", self.seed.to_string()),
            ("n_interior_knots", self.n_interior_knots.to_string()),
            ("penalty_order", self.penalty_order.to_string()),
            ("nu", self.nu.to_string()),
            ("a_delta", self.a_delta.to_string()),
            ("b_delta", self.b_delta.to_string()),
            ("alpha", self.alpha.to_string()),
            ("a_psi", self.a_psi.to_string()),
            ("b_psi", self.b_psi.to_string()),
            ("init_tau", self.init_tau.to_string()),
            ("init_lambda", self.init_lambda.to_string()),
            ("init_delta", self.init_delta.to_string()),
            ("init_psi", self.init_psi.to_string()),
            ("no_random_effects", self.no_random_effects.to_string()),
            ("grid_points", self.grid_points.to_string()),
        ]
    }

    pub fn hash(&self) -> String {
        config_hash("fit-grouped", &self.canonical_entries())
    }

    fn grouped_config(&self) -> GroupedConfig {
        GroupedConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            n_interior_knots: self.n_interior_knots,
            penalty_order: self.penalty_order,
            nu: self.nu,
            a_delta: self.a_delta,
            b_delta: self.b_delta,
            alpha: self.alpha,
            a_psi: self.a_psi,
            b_psi: self.b_psi,
            init_tau: self.init_tau,
            init_lambda: self.init_lambda,
            init_delta: self.init_delta,
            init_psi: self.init_psi,
            disable_random_effects: self.no_random_effects,
            ..GroupedConfig::default()
        }
    }
}

/// Fits the grouped model and writes draws, summary, per-group latent
/// trajectory bands, and the burden report.
pub fn run_fit_grouped(
    input: &Path,
    output_dir: &Path,
    prefix: &str,
    opts: &FitGroupedOptions,
) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let parsed = parse_functional(&text, &input.display().to_string())?;
    let data = parsed.to_grouped_dataset()?;
    let draws = fit_grouped(&data, &opts.grouped_config())?;

    let hash = opts.hash();
    let table = DrawTable::new(
        hash.clone(),
        opts.seed,
        vec![
            ("tau".to_string(), draws.tau().to_vec()),
            ("lambda".to_string(), draws.lambda().to_vec()),
            ("delta".to_string(), draws.delta().to_vec()),
            ("psi".to_string(), draws.psi().to_vec()),
            ("mu_q".to_string(), draws.mu_q().to_vec()),
            (
                "n_clusters".to_string(),
                draws.n_clusters().iter().map(|&k| k as f64).collect(),
            ),
        ],
    )?;

    // Typical-subject latent trajectory per group: spline plus the mean
    // subject effect, summarized pointwise over draws.
    let (lo, hi) = data.location_range();
    let grid = linspace(lo, hi, opts.grid_points);
    let design = draws.basis().design_matrix(&grid);
    let mut plot_rows: Vec<Vec<String>> = Vec::new();
    for g in 0..draws.n_groups() {
        let curves: Vec<Vec<f64>> = draws
            .theta()
            .iter()
            .zip(draws.mu_q())
            .map(|(theta, &mu)| (&design * &theta[g]).iter().map(|v| v + mu).collect())
            .collect();
        for (i, &s) in grid.iter().enumerate() {
            let at_point: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            plot_rows.push(vec![
                g.to_string(),
                fmt_float(s),
                fmt_float(quantile(&at_point, 0.5)),
                fmt_float(quantile(&at_point, 0.025)),
                fmt_float(quantile(&at_point, 0.975)),
            ]);
        }
    }

    let burdens = group_burden_summaries(&draws, &data)?;
    let mut burden_rows: Vec<Vec<String>> = Vec::new();
    for b in &burdens {
        let onset = b.onset_week.map(fmt_float).unwrap_or_default();
        for (i, &week) in b.weeks.iter().enumerate() {
            burden_rows.push(vec![
                b.group.to_string(),
                fmt_float(week),
                fmt_float(b.weekly_mean[i]),
                fmt_float(b.weekly_lower[i]),
                fmt_float(b.weekly_upper[i]),
                fmt_float(b.cumulative_mean[i]),
                fmt_float(b.cumulative_lower[i]),
                fmt_float(b.cumulative_upper[i]),
                onset.clone(),
            ]);
        }
    }

    let draws_path = prepare_output(output_dir, &format!("{prefix}_draws.csv"))?;
    let summary_path = prepare_output(output_dir, &format!("{prefix}_summary.csv"))?;
    let plot_path = prepare_output(output_dir, &format!("{prefix}_plot.csv"))?;
    let burden_path = prepare_output(output_dir, &format!("{prefix}_burden.csv"))?;
    for path in [&draws_path, &summary_path, &plot_path, &burden_path] {
        guard_not_input(input, path)?;
    }
    table.write(&draws_path)?;
    table.write_summary(&summary_path)?;
    write_table(
        &plot_path,
        &hash,
        opts.seed,
        &["group", "s", "median", "lower", "upper"],
        plot_rows,
    )?;
    write_table(
        &burden_path,
        &hash,
        opts.seed,
        &[
            "group",
            "week",
            "weekly_mean",
            "weekly_lower",
            "weekly_upper",
            "cumulative_mean",
            "cumulative_lower",
            "cumulative_upper",
            "onset_week",
        ],
        burden_rows,
    )?;
    Ok(vec![draws_path, summary_path, plot_path, burden_path])
}

// ---------------------------------------------------------------------------
// fit-additive

/// Command-line values for `fit-additive`.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct FitAdditiveFlags {
    /// Kept post-burn-in iterations.
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// Discarded warm-up iterations.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every thin-th post-burn-in iteration.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Top-level RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interior knots of each predictor-effect spline.
    #[arg(long)]
    pub n_interior_knots: Option<usize>,
    /// Order of the difference penalty.
    #[arg(long)]
    pub penalty_order: Option<usize>,
    /// Degrees of freedom of the smoothing-weight prior.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Gamma prior shape on the smoothing-weight rate.
    #[arg(long)]
    pub a_delta: Option<f64>,
    /// Gamma prior rate on the smoothing-weight rate.
    #[arg(long)]
    pub b_delta: Option<f64>,
    /// Dirichlet-process concentration for the subject effects.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Gamma prior shape on the base-measure precision.
    #[arg(long)]
    pub a_psi: Option<f64>,
    /// Gamma prior rate on the base-measure precision.
    #[arg(long)]
    pub b_psi: Option<f64>,
    /// Starting error precision.
    #[arg(long)]
    pub init_tau: Option<f64>,
    /// Starting smoothing weight.
    #[arg(long)]
    pub init_lambda: Option<f64>,
    /// Starting smoothing-weight rate.
    #[arg(long)]
    pub init_delta: Option<f64>,
    /// Starting base-measure precision.
    #[arg(long)]
    pub init_psi: Option<f64>,
    /// Starting autocorrelation, in (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub init_rho: Option<f64>,
    /// Points in each effect-curve grid spanning the predictor range.
    #[arg(long)]
    pub grid_points: Option<usize>,
}

/// Resolved `fit-additive` options.
#[derive(Debug, Clone, PartialEq)]
pub struct FitAdditiveOptions {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_interior_knots: usize,
    pub penalty_order: usize,
    pub nu: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    pub alpha: f64,
    pub a_psi: f64,
    pub b_psi: f64,
    pub init_tau: f64,
    pub init_lambda: f64,
    pub init_delta: f64,
    pub init_psi: f64,
    pub init_rho: f64,
    pub grid_points: usize,
}

impl FitAdditiveOptions {
    pub fn resolve(mut r: Resolver, f: &FitAdditiveFlags) -> Result<Self> {
        let d = AdditiveConfig::default();
        let opts = FitAdditiveOptions {
            n_iter: r.take("n_iter", f.n_iter, d.n_iter)?,
            burn_in: r.take("burn_in", f.burn_in, d.burn_in)?,
            thin: r.take("thin", f.thin, d.thin)?,
            seed: r.take("seed", f.seed, d.seed)?,
            n_interior_knots: r.take("n_interior_knots", f.n_interior_knots, d.n_interior_knots)?,
            penalty_order: r.take("penalty_order", f.penalty_order, d.penalty_order)?,
            nu: r.take("nu", f.nu, d.nu)?,
            a_delta: r.take("a_delta", f.a_delta, d.a_delta)?,
            b_delta: r.take("b_delta", f.b_delta, d.b_delta)?,
            alpha: r.take("alpha", f.alpha, d.alpha)?,
            a_psi: r.take("a_psi", f.a_psi, d.a_psi)?,
            b_psi: r.take("b_psi", f.b_psi, d.b_psi)?,
            init_tau: r.take("init_tau", f.init_tau, d.init_tau)?,
            init_lambda: r.take("init_lambda", f.init_lambda, d.init_lambda)?,
            init_delta: r.take("init_delta", f.init_delta, d.init_delta)?,
            init_psi: r.take("init_psi", f.init_psi, d.init_psi)?,
            init_rho: r.take("init_rho", f.init_rho, d.init_rho)?,
            grid_points: r.take("grid_points", f.grid_points, 200)?,
        };
        r.finish()?;
        check_grid_points(opts.grid_points)?;
        Ok(opts)
    }

    fn canonical_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_iter", self.n_iter.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("seed", self.seed.to_string()),
            ("n_interior_knots", self.n_interior_knots.to_string()),
            ("penalty_order", self.penalty_order.to_string()),
            ("nu", self.nu.to_string()),
            ("a_delta", self.a_delta.to_string()),
            ("b_delta", self.b_delta.to_string()),
            ("alpha", self.alpha.to_string()),
            ("a_psi", self.a_psi.to_string()),
            ("b_psi", self.b_psi.to_string()),
            ("init_tau", self.init_tau.to_string()),
            ("init_lambda", self.init_lambda.to_string()),
            ("init_delta", self.init_delta.to_string()),
            ("init_psi", self.init_psi.to_string()),
            ("init_rho", self.init_rho.to_string()),
            ("grid_points", self.grid_points.to_string()),
        ]
    }

    pub fn hash(&self) -> String {
        config_hash("fit-additive", &self.canonical_entries())
    }

    fn additive_config(&self) -> AdditiveConfig {
        AdditiveConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            n_interior_knots: self.n_interior_knots,
            penalty_order: self.penalty_order,
            nu: self.nu,
            a_delta: self.a_delta,
            b_delta: self.b_delta,
            alpha: self.alpha,
            a_psi: self.a_psi,
            b_psi: self.b_psi,
            init_tau: self.init_tau,
            init_lambda: self.init_lambda,
            init_delta: self.init_delta,
            init_psi: self.init_psi,
            init_rho: self.init_rho,
            ..AdditiveConfig::default()
        }
    }
}

/// Fits the additive autocorrelated model and writes draws, summary, and
/// the per-predictor effect curves.
pub fn run_fit_additive(
    input: &Path,
    output_dir: &Path,
    prefix: &str,
    opts: &FitAdditiveOptions,
) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let parsed = parse_functional(&text, &input.display().to_string())?;
    let data = parsed.to_additive_dataset()?;
    let ranges = parsed.covariate_ranges().expect("covariates checked");
    let draws = fit_additive_ar1(&data, &opts.additive_config())?;

    let hash = opts.hash();
    let table = DrawTable::new(
        hash.clone(),
        opts.seed,
        vec![
            ("tau".to_string(), draws.tau().to_vec()),
            ("rho".to_string(), draws.rho().to_vec()),
            ("lambda".to_string(), draws.lambda().to_vec()),
            ("delta".to_string(), draws.delta().to_vec()),
            ("psi".to_string(), draws.psi().to_vec()),
            ("mu_q".to_string(), draws.mu_q().to_vec()),
            (
                "n_clusters".to_string(),
                draws.n_clusters().iter().map(|&k| k as f64).collect(),
            ),
        ],
    )?;

    let mut plot_rows: Vec<Vec<String>> = Vec::new();
    for j in 0..N_PREDICTORS {
        let (lo, hi) = ranges[j];
        let grid = linspace(lo, hi, opts.grid_points);
        let curve = predictor_effect_curve(&draws, j, &grid)?;
        for (i, &x) in curve.x.iter().enumerate() {
            plot_rows.push(vec![
                (j + 1).to_string(),
                fmt_float(x),
                fmt_float(curve.mean[i]),
                fmt_float(curve.lower[i]),
                fmt_float(curve.upper[i]),
            ]);
        }
    }

    let draws_path = prepare_output(output_dir, &format!("{prefix}_draws.csv"))?;
    let summary_path = prepare_output(output_dir, &format!("{prefix}_summary.csv"))?;
    let plot_path = prepare_output(output_dir, &format!("{prefix}_plot.csv"))?;
    for path in [&draws_path, &summary_path, &plot_path] {
        guard_not_input(input, path)?;
    }
    table.write(&draws_path)?;
    table.write_summary(&summary_path)?;
    write_table(
        &plot_path,
        &hash,
        opts.seed,
        &["predictor", "x", "mean", "lower", "upper"],
        plot_rows,
    )?;
    Ok(vec![draws_path, summary_path, plot_path])
}

// ---------------------------------------------------------------------------
// simulate

/// Command-line values for `simulate`.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct SimulateFlags {
    /// Generating scenario, 1-4.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Replicate index within the scenario's stream.
    #[arg(long)]
    pub replicate: Option<usize>,
    /// Keep an equispaced subsample of this many points ("all" for the full
    /// grid).
    #[arg(long)]
    pub n: Option<String>,
    /// Top-level RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Resolved `simulate` options.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub scenario: Scenario,
    pub replicate: usize,
    /// `None` keeps the full grid.
    pub n: Option<usize>,
    pub seed: u64,
}

impl SimulateOptions {
    pub fn resolve(mut r: Resolver, f: &SimulateFlags) -> Result<Self> {
        let scenario_raw: String = r.take_required("scenario", f.scenario.clone())?;
        let scenario: Scenario = scenario_raw.parse().map_err(CliError::Model)?;
        let n_raw: Option<String> = r.take_opt("n", f.n.clone())?;
        let n = match n_raw.as_deref() {
            None | Some("all") => None,
            Some(raw) => Some(raw.parse::<usize>().map_err(|_| {
                CliError::input(format!(
                    "option \"n\": expected a point count or \"all\", got {raw:?}"
                ))
            })?),
        };
        let opts = SimulateOptions {
            scenario,
            replicate: r.take("replicate", f.replicate, 0)?,
            n,
            seed: r.take("seed", f.seed, 0)?,
        };
        r.finish()?;
        Ok(opts)
    }

    fn canonical_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scenario", self.scenario.to_string()),
            ("replicate", self.replicate.to_string()),
            ("n", self.n.map_or_else(|| "all".to_string(), |n| n.to_string())),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn hash(&self) -> String {
        config_hash("simulate", &self.canonical_entries())
    }

    /// Default output file stem.
    pub fn default_prefix(&self) -> String {
        format!(
            "scenario{}_rep{}",
            self.scenario.index(),
            self.replicate
        )
    }
}

/// Draws one scenario replicate and writes it as a count-series CSV. The
/// stream matches the benchmark's: simulating scenario `k`, replicate `r`
/// under seed `s` reproduces exactly the path the benchmark scored in that
/// cell.
pub fn run_simulate(
    output_dir: &Path,
    prefix: &str,
    opts: &SimulateOptions,
) -> Result<Vec<PathBuf>> {
    let mut rng = scenario_data_stream(opts.seed, opts.scenario, opts.replicate);
    let path_data = generate(opts.scenario, &mut rng);
    let grid = benchmark_grid();
    let (locations, counts): (Vec<f64>, Vec<u64>) = match opts.n {
        Some(n) => {
            let series = subsample_equispaced(&grid, &path_data.counts, n)?;
            (series.locations().to_vec(), series.counts().to_vec())
        }
        None => (grid, path_data.counts),
    };

    let out = prepare_output(output_dir, &format!("{prefix}.csv"))?;
    write_table(
        &out,
        &opts.hash(),
        opts.seed,
        &["s", "y"],
        locations
            .iter()
            .zip(&counts)
            .map(|(&s, &y)| vec![fmt_float(s), y.to_string()]),
    )?;
    Ok(vec![out])
}

// ---------------------------------------------------------------------------
// benchmark

/// Command-line values for `benchmark`.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct BenchmarkFlags {
    /// Comma-separated scenarios to run (1-4).
    #[arg(long)]
    pub scenarios: Option<String>,
    /// Comma-separated methods to run (rgp, rps, gp, ps, e).
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    pub sample_sizes: Option<String>,
    /// Replicates per scenario.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Kept post-burn-in iterations per model fit.
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// Discarded warm-up iterations per model fit.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Top-level RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Resolved `benchmark` options.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<Method>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl BenchmarkOptions {
    pub fn resolve(mut r: Resolver, f: &BenchmarkFlags) -> Result<Self> {
        let d = BenchmarkConfig::default();
        let scenarios_raw: String =
            r.take("scenarios", f.scenarios.clone(), join_list(&d.scenarios))?;
        let methods_raw: String = r.take("methods", f.methods.clone(), join_list(&d.methods))?;
        let sizes_raw: String =
            r.take("sample_sizes", f.sample_sizes.clone(), join_list(&d.sample_sizes))?;
        let opts = BenchmarkOptions {
            scenarios: parse_list(&scenarios_raw, "scenario")?,
            methods: parse_list(&methods_raw, "method")?,
            sample_sizes: parse_list(&sizes_raw, "sample-size")?,
            replicates: r.take("replicates", f.replicates, d.replicates)?,
            n_iter: r.take("n_iter", f.n_iter, d.n_iter)?,
            burn_in: r.take("burn_in", f.burn_in, d.burn_in)?,
            seed: r.take("seed", f.seed, d.seed)?,
        };
        r.finish()?;
        Ok(opts)
    }

    fn canonical_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scenarios", join_list(&self.scenarios)),
            ("methods", join_list(&self.methods)),
            ("sample_sizes", join_list(&self.sample_sizes)),
            ("replicates", self.replicates.to_string()),
            ("n_iter", self.n_iter.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn hash(&self) -> String {
        config_hash("benchmark", &self.canonical_entries())
    }

    fn benchmark_config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            scenarios: self.scenarios.clone(),
            methods: self.methods.clone(),
            sample_sizes: self.sample_sizes.clone(),
            replicates: self.replicates,
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            seed: self.seed,
        }
    }
}

/// Runs the simulation benchmark and writes the aggregated table plus every
/// replicate's score.
pub fn run_benchmark(
    output_dir: &Path,
    prefix: &str,
    opts: &BenchmarkOptions,
) -> Result<Vec<PathBuf>> {
    let results = run_benchmark_harness(&opts.benchmark_config())?;
    let hash = opts.hash();

    let summary_path = prepare_output(output_dir, &format!("{prefix}_summary.csv"))?;
    let records_path = prepare_output(output_dir, &format!("{prefix}_replicates.csv"))?;
    write_table(
        &summary_path,
        &hash,
        opts.seed,
        &["scenario", "method", "n", "replicates", "mean_mad", "sd_mad"],
        results.rows.iter().map(|row| {
            vec![
                row.scenario.to_string(),
                row.method.to_string(),
                row.n.to_string(),
                row.replicates.to_string(),
                fmt_float(row.mean_mad),
                fmt_float(row.sd_mad),
            ]
        }),
    )?;
    write_table(
        &records_path,
        &hash,
        opts.seed,
        &["scenario", "method", "n", "replicate", "mad"],
        results.records.iter().map(|rec| {
            vec![
                rec.scenario.to_string(),
                rec.method.to_string(),
                rec.n.to_string(),
                rec.replicate.to_string(),
                fmt_float(rec.mad),
            ]
        }),
    )?;
    Ok(vec![summary_path, records_path])
}

// ---------------------------------------------------------------------------
// summarize

/// Re-summarizes a draws file this tool wrote, carrying its provenance
/// forward.
pub fn run_summarize(
    input: &Path,
    output_dir: &Path,
    prefix: Option<&str>,
) -> Result<Vec<PathBuf>> {
    let table = DrawTable::read(input)?;
    let stem = match prefix {
        Some(p) => p.to_string(),
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| {
                CliError::input(format!("cannot derive a file stem from {}", input.display()))
            })?,
    };
    let out = prepare_output(output_dir, &format!("{stem}_summary.csv"))?;
    guard_not_input(input, &out)?;
    table.write_summary(&out)?;
    Ok(vec![out])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_is_inclusive_and_even() {
        let g = linspace(1.0, 3.0, 5);
        assert_eq!(g, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn gp_options_resolve_with_precedence_and_hash_stability() {
        // Same resolved values via flags and via file give the same hash.
        let flags = FitGpFlags {
            n_iter: Some(500),
            seed: Some(9),
            ..FitGpFlags::default()
        };
        let by_flags = FitGpOptions::resolve(Resolver::empty(), &flags).unwrap();

        let r = Resolver::parse("n_iter = 500\nseed = 9\n", "cfg").unwrap();
        let by_file = FitGpOptions::resolve(r, &FitGpFlags::default()).unwrap();

        assert_eq!(by_flags, by_file);
        assert_eq!(by_flags.hash(), by_file.hash());

        // A flag overrides the file.
        let r = Resolver::parse("n_iter = 10\n", "cfg").unwrap();
        let merged = FitGpOptions::resolve(r, &flags).unwrap();
        assert_eq!(merged.n_iter, 500);

        // Changing any option changes the hash.
        let mut other = by_flags.clone();
        other.seed = 10;
        assert_ne!(other.hash(), by_flags.hash());
    }

    #[test]
    fn unknown_config_keys_fail_resolution() {
        let r = Resolver::parse("bandwidth = 2\n", "cfg").unwrap();
        let err = FitGpOptions::resolve(r, &FitGpFlags::default()).unwrap_err();
        assert!(err.to_string().contains("bandwidth"), "{err}");
    }

    #[test]
    fn grid_points_must_make_a_grid() {
        let flags = FitGpFlags {
            grid_points: Some(1),
            ..FitGpFlags::default()
        };
        let err = FitGpOptions::resolve(Resolver::empty(), &flags).unwrap_err();
        assert!(err.to_string().contains("grid_points"), "{err}");
    }

    #[test]
    fn simulate_options_parse_scenario_and_subsample() {
        let flags = SimulateFlags {
            scenario: Some("3".to_string()),
            n: Some("100".to_string()),
            ..SimulateFlags::default()
        };
        let opts = SimulateOptions::resolve(Resolver::empty(), &flags).unwrap();
        assert_eq!(opts.scenario, Scenario::CountingProcess);
        assert_eq!(opts.n, Some(100));
        assert_eq!(opts.default_prefix(), "scenario3_rep0");

        let flags = SimulateFlags {
            scenario: Some("2".to_string()),
            n: Some("all".to_string()),
            ..SimulateFlags::default()
        };
        let opts = SimulateOptions::resolve(Resolver::empty(), &flags).unwrap();
        assert_eq!(opts.n, None);

        let err =
            SimulateOptions::resolve(Resolver::empty(), &SimulateFlags::default()).unwrap_err();
        assert!(err.to_string().contains("scenario"), "{err}");

        let flags = SimulateFlags {
            scenario: Some("9".to_string()),
            ..SimulateFlags::default()
        };
        assert!(SimulateOptions::resolve(Resolver::empty(), &flags).is_err());
    }

    #[test]
    fn benchmark_options_parse_lists() {
        let flags = BenchmarkFlags {
            scenarios: Some("1,3".to_string()),
            methods: Some("rps, e".to_string()),
            sample_sizes: Some("25,100".to_string()),
            ..BenchmarkFlags::default()
        };
        let opts = BenchmarkOptions::resolve(Resolver::empty(), &flags).unwrap();
        assert_eq!(
            opts.scenarios,
            vec![Scenario::IidPoisson, Scenario::CountingProcess]
        );
        assert_eq!(opts.methods, vec![Method::RoundedPspline, Method::EmpiricalStep]);
        assert_eq!(opts.sample_sizes, vec![25, 100]);

        let defaults =
            BenchmarkOptions::resolve(Resolver::empty(), &BenchmarkFlags::default()).unwrap();
        assert_eq!(defaults.scenarios.len(), 4);
        assert_eq!(defaults.methods.len(), 5);
        assert_eq!(defaults.replicates, 50);

        let flags = BenchmarkFlags {
            methods: Some("rps,rps".to_string()),
            ..BenchmarkFlags::default()
        };
        let err = BenchmarkOptions::resolve(Resolver::empty(), &flags).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }
}
