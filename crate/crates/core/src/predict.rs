//! Posterior predictive draws and the summaries shared by every model.
//!
//! Each fitted model produces draws of the latent path on a prediction grid.
//! [`PredictiveDraws`] holds those paths together with the threshold sequence
//! of the fit, and the summary functions reduce them to count-scale point
//! estimates and interval endpoints. Count quantiles use the lower order
//! statistic (rank `ceil(q * T)` among `T` draws), which is deterministic and
//! well defined for integer-valued samples.

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::rounding::{round_value, ThresholdSequence};

/// Latent-scale posterior predictive paths on a common grid.
#[derive(Debug, Clone)]
pub struct PredictiveDraws {
    grid: Vec<f64>,
    paths: Vec<Vec<f64>>,
    thresholds: ThresholdSequence,
}

impl PredictiveDraws {
    pub(crate) fn new(
        grid: Vec<f64>,
        paths: Vec<Vec<f64>>,
        thresholds: ThresholdSequence,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::domain("prediction grid must be non-empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("prediction grid must be finite"));
        }
        if paths.is_empty() {
            return Err(Error::domain("no predictive draws were produced"));
        }
        for (k, p) in paths.iter().enumerate() {
            if p.len() != grid.len() {
                return Err(Error::domain(format!(
                    "predictive draw {k} has length {} but the grid has {}",
                    p.len(),
                    grid.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(format!(
                    "predictive draw {k} contains a non-finite value"
                )));
            }
        }
        Ok(PredictiveDraws {
            grid,
            paths,
            thresholds,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Number of grid locations.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn n_draws(&self) -> usize {
        self.paths.len()
    }

    /// Latent-scale paths, one inner vector per kept draw.
    pub fn paths(&self) -> &[Vec<f64>] {
        &self.paths
    }

    pub fn thresholds(&self) -> &ThresholdSequence {
        &self.thresholds
    }

    /// Pointwise average of the latent paths.
    pub fn latent_mean_series(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for p in &self.paths {
            for (o, &v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        let t = self.paths.len() as f64;
        out.iter_mut().for_each(|o| *o /= t);
        out
    }

    /// Pointwise latent-scale quantile (lower order statistic) across draws.
    pub fn latent_quantile_series(&self, q: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
        }
        let mut column = vec![0.0; self.paths.len()];
        Ok((0..self.grid.len())
            .map(|g| {
                for (c, p) in column.iter_mut().zip(&self.paths) {
                    *c = p[g];
                }
                diagnostics::quantile(&column, q)
            })
            .collect())
    }

    /// Every path pushed through the rounding operator.
    pub fn count_paths(&self) -> Result<Vec<Vec<u64>>> {
        self.paths
            .iter()
            .map(|p| {
                p.iter()
                    .map(|&v| round_value(v, &self.thresholds))
                    .collect()
            })
            .collect()
    }
}

/// Pointwise posterior median of the rounded draws: the count-scale point
/// estimate used throughout.
pub fn posterior_median_series(pred: &PredictiveDraws) -> Result<Vec<u64>> {
    count_quantile_series(pred, 0.5)
}

/// Pointwise count-scale quantile of the rounded draws, as the lower order
/// statistic of rank `ceil(q * T)`.
pub fn count_quantile_series(pred: &PredictiveDraws, q: f64) -> Result<Vec<u64>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
    }
    let t = pred.paths.len();
    let rank = ((q * t as f64).ceil() as usize).clamp(1, t);
    let mut column = vec![0u64; t];
    let ts = &pred.thresholds;
    let mut out = Vec::with_capacity(pred.grid.len());
    for g in 0..pred.grid.len() {
        for (c, p) in column.iter_mut().zip(&pred.paths) {
            *c = round_value(p[g], ts)?;
        }
        column.sort_unstable();
        out.push(column[rank - 1]);
    }
    Ok(out)
}
