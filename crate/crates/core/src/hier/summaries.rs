//! Count-scale posterior summaries for the hierarchical fits: conditional
//! count expectations, predictor effect curves, and per-group burden and
//! onset reports.

use crate::diagnostics::{mean, quantile};
use crate::error::{Error, Result};
use crate::hier::additive::{AdditiveDraws, N_PREDICTORS};
use crate::hier::grouped::GroupedDraws;
use crate::hier::FunctionalDataset;
use crate::rounding::{induced_mean, GaussianMarginal, ThresholdSequence};

/// Tail mass at which count expectations are truncated.
const TAIL_PROB: f64 = 1e-4;

/// Expected count when the latent value is `N(mu_star, 1/tau)`: the mean of
/// the induced count distribution (truncated at the `1 - 1e-4` quantile).
pub fn conditional_count_expectation(
    mu_star: f64,
    tau: f64,
    thresholds: &ThresholdSequence,
) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::domain(format!(
            "precision must be positive and finite, got {tau}"
        )));
    }
    let marginal = GaussianMarginal::new(mu_star, tau.sqrt().recip())?;
    induced_mean(&marginal, TAIL_PROB, thresholds)
}

/// Posterior mean of one group's smooth `b(s)^T theta_g` on a grid.
pub fn group_smooth_mean(draws: &GroupedDraws, group: usize, grid: &[f64]) -> Result<Vec<f64>> {
    check_group(draws, group)?;
    check_grid(grid)?;
    let design = draws.basis().design_matrix(grid);
    let mut acc = vec![0.0f64; grid.len()];
    for d in draws.theta() {
        let smooth = &design * &d[group];
        for (a, v) in acc.iter_mut().zip(smooth.iter()) {
            *a += v;
        }
    }
    let n = draws.n_draws() as f64;
    for a in acc.iter_mut() {
        *a /= n;
    }
    Ok(acc)
}

/// Per-draw grid-mean contrast `mean_s[b(s)^T theta_b - b(s)^T theta_a]`
/// between two groups' smooths.
pub fn group_contrast_draws(
    draws: &GroupedDraws,
    group_a: usize,
    group_b: usize,
    grid: &[f64],
) -> Result<Vec<f64>> {
    check_group(draws, group_a)?;
    check_group(draws, group_b)?;
    check_grid(grid)?;
    let design = draws.basis().design_matrix(grid);
    let mut out = Vec::with_capacity(draws.n_draws());
    for d in draws.theta() {
        let diff = &design * (&d[group_b] - &d[group_a]);
        out.push(diff.sum() / grid.len() as f64);
    }
    Ok(out)
}

fn check_group(draws: &GroupedDraws, group: usize) -> Result<()> {
    if group >= draws.n_groups() {
        return Err(Error::domain(format!(
            "group {group} out of range, fit has {} groups",
            draws.n_groups()
        )));
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("grid must be non-empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("grid must be finite"));
    }
    Ok(())
}

/// Pointwise posterior summary of one predictor's effect on the expected
/// count, with the other predictors held at their observed means.
#[derive(Debug, Clone)]
pub struct EffectCurve {
    /// Raw predictor values the curve is evaluated at.
    pub x: Vec<f64>,
    /// Posterior mean expected count.
    pub mean: Vec<f64>,
    /// Central 95% interval bounds.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Expected-count curve in predictor `j` (0-based) over a grid of raw
/// predictor values, averaging over the posterior. Each draw evaluates
/// `b_j(x)^T theta_j` plus the other effects at their predictor means plus
/// the mean subject effect, then maps through the conditional count
/// expectation. Grid values outside the observed predictor range are a
/// domain error.
pub fn predictor_effect_curve(
    draws: &AdditiveDraws,
    predictor: usize,
    grid: &[f64],
) -> Result<EffectCurve> {
    if predictor >= N_PREDICTORS {
        return Err(Error::domain(format!(
            "predictor index {predictor} out of range 0..{N_PREDICTORS}"
        )));
    }
    check_grid(grid)?;
    let (m, sd) = draws.standardize()[predictor];
    let basis = &draws.bases()[predictor];
    let (lo, hi) = basis.range();
    let zs: Vec<f64> = grid.iter().map(|&x| (x - m) / sd).collect();
    for (&x, &z) in grid.iter().zip(&zs) {
        if z < lo || z > hi {
            return Err(Error::domain(format!(
                "grid value {x} outside the observed predictor range"
            )));
        }
    }

    // Reference rows: every other effect at its predictor mean (z = 0).
    let ref_rows: Vec<Vec<f64>> = (0..N_PREDICTORS)
        .map(|l| draws.bases()[l].eval(0.0))
        .collect();
    let grid_rows: Vec<Vec<f64>> = zs.iter().map(|&z| basis.eval(z)).collect();

    let n_draws = draws.n_draws();
    let ts = draws.thresholds();
    let mut columns = vec![Vec::with_capacity(n_draws); grid.len()];
    for d in 0..n_draws {
        let theta = &draws.theta()[d];
        let tau = draws.tau()[d];
        let mut offset = draws.mu_q()[d];
        for l in 0..N_PREDICTORS {
            if l != predictor {
                offset += dot(&ref_rows[l], &theta[l]);
            }
        }
        for (g, row) in grid_rows.iter().enumerate() {
            let mu = offset + dot(row, &theta[predictor]);
            columns[g].push(conditional_count_expectation(mu, tau, ts)?);
        }
    }

    let mut out = EffectCurve {
        x: grid.to_vec(),
        mean: Vec::with_capacity(grid.len()),
        lower: Vec::with_capacity(grid.len()),
        upper: Vec::with_capacity(grid.len()),
    };
    for col in &columns {
        out.mean.push(mean(col));
        out.lower.push(quantile(col, 0.025));
        out.upper.push(quantile(col, 0.975));
    }
    Ok(out)
}

fn dot(row: &[f64], theta: &nalgebra::DVector<f64>) -> f64 {
    row.iter().zip(theta.iter()).map(|(a, b)| a * b).sum()
}

/// Per-draw weekly burden of one group: at each observed week, the mean over
/// the group's subjects of the conditional count expectation given that
/// subject's effect and the group smooth. Indexed `[draw][week]`.
pub fn group_weekly_burden_draws(
    draws: &GroupedDraws,
    data: &FunctionalDataset,
    group: usize,
) -> Result<Vec<Vec<f64>>> {
    check_group(draws, group)?;
    check_burden_inputs(draws, data)?;
    let weeks = data.unique_locations();
    let design = draws.basis().design_matrix(&weeks);
    let members: Vec<usize> = (0..data.n_subjects())
        .filter(|&i| data.subjects()[i].group() == group)
        .collect();
    let ts = draws.thresholds();
    let mut out = Vec::with_capacity(draws.n_draws());
    for d in 0..draws.n_draws() {
        let smooth = &design * &draws.theta()[d][group];
        let tau = draws.tau()[d];
        let xi = &draws.xi()[d];
        let mut weekly = Vec::with_capacity(weeks.len());
        for w in 0..weeks.len() {
            let mut acc = 0.0;
            for &i in &members {
                acc += conditional_count_expectation(xi[i] + smooth[w], tau, ts)?;
            }
            weekly.push(acc / members.len() as f64);
        }
        out.push(weekly);
    }
    Ok(out)
}

fn check_burden_inputs(draws: &GroupedDraws, data: &FunctionalDataset) -> Result<()> {
    if draws.n_groups() != data.n_groups() {
        return Err(Error::domain(format!(
            "fit has {} groups but dataset has {}",
            draws.n_groups(),
            data.n_groups()
        )));
    }
    if draws.xi()[0].len() != data.n_subjects() {
        return Err(Error::domain(format!(
            "fit has {} subjects but dataset has {}",
            draws.xi()[0].len(),
            data.n_subjects()
        )));
    }
    Ok(())
}

/// Posterior burden report for one group.
#[derive(Debug, Clone)]
pub struct GroupBurdenSummary {
    pub group: usize,
    /// Sorted unique observation times the report covers.
    pub weeks: Vec<f64>,
    /// Posterior mean and central 95% interval of the weekly group-mean
    /// expected count.
    pub weekly_mean: Vec<f64>,
    pub weekly_lower: Vec<f64>,
    pub weekly_upper: Vec<f64>,
    /// Posterior mean and central 95% interval of the running total burden.
    pub cumulative_mean: Vec<f64>,
    pub cumulative_lower: Vec<f64>,
    pub cumulative_upper: Vec<f64>,
    /// Posterior median of the first week at which a typical subject's
    /// expected count reaches 0.5, or `None` if that never happens in at
    /// least half the draws.
    pub onset_week: Option<f64>,
}

/// Expected-count threshold defining onset for the burden report.
const ONSET_THRESHOLD: f64 = 0.5;

/// Weekly, cumulative, and onset summaries for every group.
pub fn group_burden_summaries(
    draws: &GroupedDraws,
    data: &FunctionalDataset,
) -> Result<Vec<GroupBurdenSummary>> {
    check_burden_inputs(draws, data)?;
    let weeks = data.unique_locations();
    let design = draws.basis().design_matrix(&weeks);
    let ts = draws.thresholds();
    let mut out = Vec::with_capacity(draws.n_groups());
    for g in 0..draws.n_groups() {
        let weekly = group_weekly_burden_draws(draws, data, g)?;
        let n_draws = weekly.len();

        // Onset per draw: a typical subject carries the mean effect mu_q.
        let mut onsets = Vec::with_capacity(n_draws);
        for d in 0..n_draws {
            let smooth = &design * &draws.theta()[d][g];
            let tau = draws.tau()[d];
            let mu_q = draws.mu_q()[d];
            let mut onset = f64::INFINITY;
            for (w, &week) in weeks.iter().enumerate() {
                if conditional_count_expectation(mu_q + smooth[w], tau, ts)? >= ONSET_THRESHOLD {
                    onset = week;
                    break;
                }
            }
            onsets.push(onset);
        }
        onsets.sort_by(|a, b| a.partial_cmp(b).expect("onsets are ordered"));
        let median = onsets[(n_draws - 1) / 2];
        let onset_week = median.is_finite().then_some(median);

        let mut summary = GroupBurdenSummary {
            group: g,
            weeks: weeks.clone(),
            weekly_mean: Vec::with_capacity(weeks.len()),
            weekly_lower: Vec::with_capacity(weeks.len()),
            weekly_upper: Vec::with_capacity(weeks.len()),
            cumulative_mean: Vec::with_capacity(weeks.len()),
            cumulative_lower: Vec::with_capacity(weeks.len()),
            cumulative_upper: Vec::with_capacity(weeks.len()),
            onset_week,
        };
        let mut cumulative: Vec<f64> = vec![0.0; n_draws];
        let mut column = vec![0.0f64; n_draws];
        for w in 0..weeks.len() {
            for d in 0..n_draws {
                column[d] = weekly[d][w];
                cumulative[d] += weekly[d][w];
            }
            summary.weekly_mean.push(mean(&column));
            summary.weekly_lower.push(quantile(&column, 0.025));
            summary.weekly_upper.push(quantile(&column, 0.975));
            summary.cumulative_mean.push(mean(&cumulative));
            summary.cumulative_lower.push(quantile(&cumulative, 0.025));
            summary.cumulative_upper.push(quantile(&cumulative, 0.975));
        }
        out.push(summary);
    }
    Ok(out)
}
