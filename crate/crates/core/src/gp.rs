//! Rounded Gaussian-process model with a squared-exponential kernel.
//!
//! The latent path follows `y* ~ N(0, tau1 * C(tau2))` with
//! `C(tau2)[i, j] = exp(-tau2 * (s_i - s_j)^2)`, and the observed counts are
//! `y_i = h(y*_i)` for the threshold operator `h`. The sampler alternates
//! three updates:
//!
//! 1. the latent path from its multivariate normal law restricted to the
//!    rectangle of intervals implied by the counts (slice sampler);
//! 2. the scale `tau1` from its conjugate inverse-gamma conditional;
//! 3. the bandwidth `tau2` by random-walk Metropolis-Hastings on `ln tau2`,
//!    with the proposal width adapted during burn-in.
//!
//! Prediction draws the latent path at new locations from the conditional
//! normal law given each kept draw, caching the conditioning solves per
//! distinct bandwidth value (consecutive kept draws share the bandwidth
//! whenever a proposal was rejected, so the cache hits often).
//!
//! [`gp_fit_continuous`] fits the same prior to directly observed continuous
//! values (no rounding, no latent update); it is the first stage of the
//! two-stage baseline in the benchmark harness.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::predict::PredictiveDraws;
use crate::rounding::{CountSeries, LatentSeries, ThresholdSequence};
use crate::samplers::{
    cholesky_with_jitter, sample_gamma, sample_tmvn_slice, MvnParams, Rectangle, RngStream,
};

/// Conditional variances at or below this value (on the unit correlation
/// scale) mark a prediction location as coincident with an observed one; the
/// draw there is pinned to the conditional mean instead of receiving
/// jitter-scale noise that could flip a count at an interval boundary.
const DEGENERATE_VAR: f64 = 1e-7;

/// Hard range for the log-bandwidth random walk; proposals outside are
/// rejected outright, which truncates the bandwidth prior to
/// `[e^-18, e^18]` and keeps the correlation builds well conditioned.
const LOG_TAU2_RANGE: f64 = 18.0;

/// Squared-exponential kernel value `tau1 * exp(-tau2 * (s - t)^2)`.
pub fn sq_exp(tau1: f64, tau2: f64, s: f64, t: f64) -> f64 {
    tau1 * (-tau2 * (s - t) * (s - t)).exp()
}

/// Unit-scale correlation matrix `exp(-tau2 * (s_i - s_j)^2)` over locations.
pub fn correlation_matrix(tau2: f64, locations: &[f64]) -> DMatrix<f64> {
    let n = locations.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = locations[i] - locations[j];
        (-tau2 * d * d).exp()
    })
}

/// Unit-scale cross-correlation matrix between two location sets.
pub fn cross_correlation(tau2: f64, rows: &[f64], cols: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let d = rows[i] - cols[j];
        (-tau2 * d * d).exp()
    })
}

/// Sampler configuration for the Gaussian-process fits.
#[derive(Debug, Clone)]
pub struct GpConfig {
    /// Post-burn-in iterations (kept draws are these, thinned).
    pub n_iter: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in iteration.
    pub thin: usize,
    pub seed: u64,
    /// Gamma prior shape and rate on the inverse scale `1 / tau1`.
    pub a_tau1: f64,
    pub b_tau1: f64,
    /// Gamma prior shape and rate on `tau2^tau2_power`.
    pub a_tau2: f64,
    pub b_tau2: f64,
    pub tau2_power: f64,
    pub init_tau1: f64,
    pub init_tau2: f64,
    /// Update the bandwidth only on every k-th iteration. Each update
    /// refactorizes the correlation matrix, so this is the main cost lever
    /// for large series.
    pub tau2_update_every: usize,
    pub thresholds: ThresholdSequence,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            n_iter: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            a_tau1: 1.0,
            b_tau1: 1.0,
            a_tau2: 1.0,
            b_tau2: 1.0,
            tau2_power: 1.0,
            init_tau1: 1.0,
            init_tau2: 1.0,
            tau2_update_every: 1,
            thresholds: ThresholdSequence::standard(),
        }
    }
}

impl GpConfig {
    fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin == 0 || self.tau2_update_every == 0 {
            return Err(Error::domain(
                "n_iter, thin, and tau2_update_every must be at least 1",
            ));
        }
        for (name, v) in [
            ("a_tau1", self.a_tau1),
            ("b_tau1", self.b_tau1),
            ("a_tau2", self.a_tau2),
            ("b_tau2", self.b_tau2),
            ("tau2_power", self.tau2_power),
            ("init_tau1", self.init_tau1),
            ("init_tau2", self.init_tau2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Kept draws from a Gaussian-process fit.
#[derive(Debug, Clone)]
pub struct GpDraws {
    locations: Vec<f64>,
    thresholds: ThresholdSequence,
    tau1: Vec<f64>,
    tau2: Vec<f64>,
    latent: Vec<DVector<f64>>,
    accept_rate_tau2: f64,
}

impl GpDraws {
    pub fn n_draws(&self) -> usize {
        self.tau1.len()
    }

    /// Observed locations the fit conditioned on.
    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn thresholds(&self) -> &ThresholdSequence {
        &self.thresholds
    }

    /// Kept scale draws.
    pub fn tau1(&self) -> &[f64] {
        &self.tau1
    }

    /// Kept bandwidth draws.
    pub fn tau2(&self) -> &[f64] {
        &self.tau2
    }

    /// Kept latent paths at the observed locations.
    pub fn latent(&self) -> &[DVector<f64>] {
        &self.latent
    }

    /// Post-burn-in acceptance rate of the bandwidth random walk.
    pub fn accept_rate_tau2(&self) -> f64 {
        self.accept_rate_tau2
    }
}

/// Correlation-matrix factorization shared by the sampler steps, refreshed
/// whenever the bandwidth moves.
struct CorrCache {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
    /// Inverse, built only for the rounded model (the latent slice update
    /// needs the dense precision).
    inv: Option<DMatrix<f64>>,
}

impl CorrCache {
    fn build(tau2: f64, locations: &[f64], need_inv: bool) -> Result<Self> {
        let c = correlation_matrix(tau2, locations);
        let (chol, _) = cholesky_with_jitter(&c)?;
        let logdet = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|&d| d.ln())
                .sum::<f64>();
        let inv = need_inv.then(|| chol.inverse());
        Ok(CorrCache { chol, logdet, inv })
    }

    /// Quadratic form `y^T (C + jitter I)^{-1} y`.
    fn quad_form(&self, y: &DVector<f64>) -> f64 {
        let z = self.chol.solve(y);
        y.dot(&z).max(0.0)
    }
}

/// Log of the bandwidth conditional in `t = ln tau2`, up to a constant:
/// prior `tau2^power ~ Gamma(a, b)` (including the change-of-variable
/// Jacobian) plus the Gaussian likelihood terms that involve `tau2`.
fn log_tau2_target(cfg: &GpConfig, t: f64, logdet: f64, quad: f64, tau1: f64) -> f64 {
    cfg.a_tau2 * cfg.tau2_power * t - cfg.b_tau2 * (cfg.tau2_power * t).exp() - 0.5 * logdet
        - 0.5 * quad / tau1
}

/// Fits the rounded Gaussian-process model to a count series.
pub fn gp_fit(data: &CountSeries, cfg: &GpConfig) -> Result<GpDraws> {
    cfg.validate()?;
    let ts = &cfg.thresholds;
    let lower: Vec<f64> = data.counts().iter().map(|&y| ts.lower(y)).collect();
    let upper: Vec<f64> = data.counts().iter().map(|&y| ts.upper(y)).collect();
    let rect = Rectangle::new(lower, upper)?;
    let init = DVector::from_iterator(
        data.len(),
        data.counts().iter().map(|&y| ts.interval_center(y)),
    );
    run_chain(data.locations(), Some(rect), init, cfg)
}

/// Fits the same Gaussian-process prior to directly observed continuous
/// values: the latent path is fixed at the data and only the scale and
/// bandwidth are sampled. First stage of the two-stage baseline.
pub fn gp_fit_continuous(data: &LatentSeries, cfg: &GpConfig) -> Result<GpDraws> {
    cfg.validate()?;
    let init = DVector::from_column_slice(data.values());
    run_chain(data.locations(), None, init, cfg)
}

fn run_chain(
    locations: &[f64],
    rect: Option<Rectangle>,
    init: DVector<f64>,
    cfg: &GpConfig,
) -> Result<GpDraws> {
    let n = locations.len();
    let need_inv = rect.is_some();
    let mut rng = RngStream::new(cfg.seed);
    let mut latent = init;
    let mut tau1 = cfg.init_tau1;
    let mut tau2 = cfg.init_tau2;
    let mut cache = CorrCache::build(tau2, locations, need_inv)?;

    let mut prop_sd = 0.5_f64;
    let mut window_attempts = 0usize;
    let mut window_accepts = 0usize;
    let mut post_attempts = 0usize;
    let mut post_accepts = 0usize;

    let kept_cap = cfg.n_iter.div_ceil(cfg.thin);
    let mut tau1_draws = Vec::with_capacity(kept_cap);
    let mut tau2_draws = Vec::with_capacity(kept_cap);
    let mut latent_draws = Vec::with_capacity(kept_cap);

    let total = cfg.burn_in + cfg.n_iter;
    for iter in 0..total {
        if let Some(rect) = &rect {
            let precision = cache
                .inv
                .as_ref()
                .expect("rounded chain keeps the inverse")
                .scale(1.0 / tau1);
            let params = MvnParams::trusted(DVector::zeros(n), precision, false);
            latent = sample_tmvn_slice(&params, rect, &latent, &mut rng)?;
        }

        let quad = cache.quad_form(&latent);
        let shape = cfg.a_tau1 + 0.5 * n as f64;
        let rate = cfg.b_tau1 + 0.5 * quad;
        tau1 = 1.0 / sample_gamma(shape, rate, &mut rng)?;

        if iter % cfg.tau2_update_every == 0 {
            let t = tau2.ln();
            let t_prop = t + prop_sd * rng.standard_normal();
            let mut accepted = false;
            if t_prop.abs() <= LOG_TAU2_RANGE {
                let cand = CorrCache::build(t_prop.exp(), locations, false)?;
                let quad_prop = cand.quad_form(&latent);
                let lt_cur = log_tau2_target(cfg, t, cache.logdet, quad, tau1);
                let lt_prop = log_tau2_target(cfg, t_prop, cand.logdet, quad_prop, tau1);
                if rng.uniform().max(1e-300).ln() < lt_prop - lt_cur {
                    tau2 = t_prop.exp();
                    cache = CorrCache {
                        inv: need_inv.then(|| cand.chol.inverse()),
                        ..cand
                    };
                    accepted = true;
                }
            }
            if iter < cfg.burn_in {
                window_attempts += 1;
                window_accepts += accepted as usize;
                if window_attempts == 50 {
                    let r = window_accepts as f64 / window_attempts as f64;
                    if r < 0.25 {
                        prop_sd *= 0.7;
                    } else if r > 0.45 {
                        prop_sd *= 1.4;
                    }
                    prop_sd = prop_sd.clamp(1e-3, 10.0);
                    window_attempts = 0;
                    window_accepts = 0;
                }
            } else {
                post_attempts += 1;
                post_accepts += accepted as usize;
            }
        }

        if iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 {
            tau1_draws.push(tau1);
            tau2_draws.push(tau2);
            latent_draws.push(latent.clone());
        }
    }

    Ok(GpDraws {
        locations: locations.to_vec(),
        thresholds: cfg.thresholds.clone(),
        tau1: tau1_draws,
        tau2: tau2_draws,
        latent: latent_draws,
        accept_rate_tau2: post_accepts as f64 / post_attempts.max(1) as f64,
    })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("prediction grid must be non-empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("prediction grid must be finite"));
    }
    Ok(())
}

/// Conditioning solves shared by all kept draws with the same bandwidth.
struct JointPredCache {
    tau2: f64,
    /// `C_n^{-1} C_*`, so conditional means are `w^T y*`.
    w: DMatrix<f64>,
    /// Grid indices with non-degenerate conditional variance.
    free: Vec<usize>,
    /// Cholesky factor of the free block of the conditional correlation.
    free_l: DMatrix<f64>,
}

impl JointPredCache {
    fn build(tau2: f64, locations: &[f64], grid: &[f64]) -> Result<Self> {
        let cn = correlation_matrix(tau2, locations);
        let (chn, _) = cholesky_with_jitter(&cn)?;
        let cstar = cross_correlation(tau2, locations, grid);
        let w = chn.solve(&cstar);
        let mut s = correlation_matrix(tau2, grid);
        s.gemm(-1.0, &cstar.transpose(), &w, 1.0);
        let s = (&s + &s.transpose()) * 0.5;
        let free: Vec<usize> = (0..grid.len())
            .filter(|&g| s[(g, g)] > DEGENERATE_VAR)
            .collect();
        let free_l = if free.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            let sub = s.select_rows(free.iter()).select_columns(free.iter());
            cholesky_with_jitter(&sub)?.0.l()
        };
        Ok(JointPredCache {
            tau2,
            w,
            free,
            free_l,
        })
    }
}

/// Posterior predictive draws of the latent path on a grid, one joint
/// conditional normal draw per kept draw. Grid locations that coincide with
/// observed ones have (numerically) zero conditional variance and are pinned
/// to the conditional mean, so their rounded values reproduce the data.
pub fn gp_predict(draws: &GpDraws, grid: &[f64], seed: u64) -> Result<PredictiveDraws> {
    validate_grid(grid)?;
    let mut rng = RngStream::new(seed);
    let mut cache: Option<JointPredCache> = None;
    let mut paths = Vec::with_capacity(draws.n_draws());
    for k in 0..draws.n_draws() {
        let tau2 = draws.tau2[k];
        if cache.as_ref().map_or(true, |c| c.tau2 != tau2) {
            cache = Some(JointPredCache::build(tau2, &draws.locations, grid)?);
        }
        let c = cache.as_ref().expect("cache was just filled");
        let mut path = c.w.tr_mul(&draws.latent[k]);
        if !c.free.is_empty() {
            let z = DVector::from_fn(c.free.len(), |_, _| rng.standard_normal());
            let noise = &c.free_l * z;
            let sd = draws.tau1[k].sqrt();
            for (idx, &g) in c.free.iter().enumerate() {
                path[g] += sd * noise[idx];
            }
        }
        paths.push(path.as_slice().to_vec());
    }
    PredictiveDraws::new(grid.to_vec(), paths, draws.thresholds.clone())
}

struct PointwisePredCache {
    tau2: f64,
    w: DMatrix<f64>,
    /// Unit-scale conditional standard deviation per grid point; exactly
    /// zero where the variance is degenerate (coincident locations).
    sd_unit: Vec<f64>,
}

impl PointwisePredCache {
    fn build(tau2: f64, locations: &[f64], grid: &[f64]) -> Result<Self> {
        let cn = correlation_matrix(tau2, locations);
        let (chn, _) = cholesky_with_jitter(&cn)?;
        let cstar = cross_correlation(tau2, locations, grid);
        let w = chn.solve(&cstar);
        let sd_unit = (0..grid.len())
            .map(|g| {
                let v = 1.0 - cstar.column(g).dot(&w.column(g));
                if v > DEGENERATE_VAR {
                    v.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        Ok(PointwisePredCache { tau2, w, sd_unit })
    }
}

/// Posterior predictive draws sampled independently from each grid point's
/// conditional marginal instead of from the joint conditional law.
///
/// Pointwise summaries (medians, quantiles, means) have exactly the same
/// distribution as under [`gp_predict`] at a fraction of the cost, because
/// each location's marginal is identical; individual draws, however, are not
/// coherent sample paths. The benchmark harness uses this variant since it
/// only consumes pointwise medians.
pub fn gp_predict_pointwise(draws: &GpDraws, grid: &[f64], seed: u64) -> Result<PredictiveDraws> {
    validate_grid(grid)?;
    let mut rng = RngStream::new(seed);
    let mut cache: Option<PointwisePredCache> = None;
    let mut paths = Vec::with_capacity(draws.n_draws());
    for k in 0..draws.n_draws() {
        let tau2 = draws.tau2[k];
        if cache.as_ref().map_or(true, |c| c.tau2 != tau2) {
            cache = Some(PointwisePredCache::build(tau2, &draws.locations, grid)?);
        }
        let c = cache.as_ref().expect("cache was just filled");
        let mean = c.w.tr_mul(&draws.latent[k]);
        let sd = draws.tau1[k].sqrt();
        let path: Vec<f64> = (0..grid.len())
            .map(|g| mean[g] + sd * c.sd_unit[g] * rng.standard_normal())
            .collect();
        paths.push(path);
    }
    PredictiveDraws::new(grid.to_vec(), paths, draws.thresholds.clone())
}

/// Average over kept draws of the conditional mean curve `E[y*(grid) | y*]`.
/// This is the smooth point estimate of the two-stage baseline, which rounds
/// it once at the end instead of rounding per draw.
pub fn gp_conditional_mean_series(draws: &GpDraws, grid: &[f64]) -> Result<Vec<f64>> {
    validate_grid(grid)?;
    let mut acc = DVector::zeros(grid.len());
    let mut cache: Option<PointwisePredCache> = None;
    for k in 0..draws.n_draws() {
        let tau2 = draws.tau2[k];
        if cache.as_ref().map_or(true, |c| c.tau2 != tau2) {
            cache = Some(PointwisePredCache::build(tau2, &draws.locations, grid)?);
        }
        let c = cache.as_ref().expect("cache was just filled");
        acc += c.w.tr_mul(&draws.latent[k]);
    }
    Ok((acc / draws.n_draws() as f64).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{ks_critical, ks_statistic};
    use crate::predict::posterior_median_series;
    use crate::rounding::round_value;

    #[test]
    fn kernel_building_blocks() {
        assert!((sq_exp(2.0, 0.5, 1.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((sq_exp(2.0, 0.5, 0.0, 2.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        let locs = [0.0, 1.0, 3.0];
        let c = correlation_matrix(0.7, &locs);
        for i in 0..3 {
            assert_eq!(c[(i, i)], 1.0);
            for j in 0..3 {
                assert_eq!(c[(i, j)], c[(j, i)]);
            }
        }
        let x = cross_correlation(0.7, &locs, &[0.5, 2.0]);
        assert_eq!(x.nrows(), 3);
        assert_eq!(x.ncols(), 2);
        assert!((x[(0, 0)] - (-0.7f64 * 0.25).exp()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let data = CountSeries::new(vec![0.0, 1.0], vec![1, 2]).unwrap();
        let bad = GpConfig {
            n_iter: 0,
            ..GpConfig::default()
        };
        assert!(gp_fit(&data, &bad).is_err());
        let bad = GpConfig {
            a_tau1: -1.0,
            ..GpConfig::default()
        };
        assert!(gp_fit(&data, &bad).is_err());
    }

    fn quick_cfg(seed: u64) -> GpConfig {
        GpConfig {
            n_iter: 300,
            burn_in: 100,
            seed,
            ..GpConfig::default()
        }
    }

    #[test]
    fn rounded_fit_keeps_latents_in_their_intervals() {
        let locs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let counts = vec![3u64; 10];
        let data = CountSeries::new(locs, counts).unwrap();
        let draws = gp_fit(&data, &quick_cfg(5)).unwrap();
        assert_eq!(draws.n_draws(), 300);
        for k in 0..draws.n_draws() {
            assert!(draws.tau1()[k] > 0.0);
            assert!(draws.tau2()[k] > 0.0);
            for i in 0..10 {
                let v = draws.latent()[k][i];
                assert!((2.0..3.0).contains(&v), "latent {v} outside [2, 3)");
            }
        }
        // The walk should both accept and reject sometimes.
        assert!(draws.accept_rate_tau2() > 0.0 && draws.accept_rate_tau2() < 1.0);
    }

    /// Marginal density of the bandwidth given a fixed latent path, with the
    /// scale integrated out analytically, evaluated by quadrature. The
    /// two-observation case keeps every term closed-form.
    fn tau2_marginal_cdf_two_points(y: (f64, f64), taus: &[f64]) -> Vec<f64> {
        let jitter = 1e-8; // factorization jitter at unit correlation scale
        let log_density = |tau2: f64| -> f64 {
            let c = (-tau2).exp(); // distance 1 between the two locations
            let d = 1.0 + jitter;
            let det: f64 = d * d - c * c;
            let quad = (d * (y.0 * y.0 + y.1 * y.1) - 2.0 * c * y.0 * y.1) / det;
            // prior Gamma(1, 1) on tau2, scale prior Gamma(1, 1) integrated
            // out of the n = 2 Gaussian likelihood
            -tau2 - 0.5 * det.ln() - 2.0 * (1.0 + 0.5 * quad).ln()
        };
        let mut dens: Vec<f64> = taus.iter().map(|&t| log_density(t)).collect();
        let peak = dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        dens.iter_mut().for_each(|d| *d = (*d - peak).exp());
        let mut cdf = vec![0.0; taus.len()];
        for i in 1..taus.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (taus[i] - taus[i - 1]);
        }
        let total = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|v| *v /= total);
        cdf
    }

    #[test]
    fn bandwidth_chain_matches_quadrature_marginal() {
        let y = (0.3, -0.4);
        let data = LatentSeries::new(vec![0.0, 1.0], vec![y.0, y.1]).unwrap();
        let cfg = GpConfig {
            n_iter: 200_000,
            burn_in: 2_000,
            thin: 20,
            seed: 1234,
            ..GpConfig::default()
        };
        let draws = gp_fit_continuous(&data, &cfg).unwrap();
        let kept = draws.tau2();
        assert_eq!(kept.len(), 10_000);

        let taus: Vec<f64> = (0..30_000).map(|i| 1e-6 + i as f64 * 2e-3).collect();
        let cdf = tau2_marginal_cdf_two_points(y, &taus);
        let interp = |x: f64| -> f64 {
            if x <= taus[0] {
                return 0.0;
            }
            if x >= *taus.last().unwrap() {
                return 1.0;
            }
            let idx = taus.partition_point(|&t| t <= x);
            let (t0, t1) = (taus[idx - 1], taus[idx]);
            let (c0, c1) = (cdf[idx - 1], cdf[idx]);
            c0 + (c1 - c0) * (x - t0) / (t1 - t0)
        };
        let d = ks_statistic(kept, interp);
        let crit = ks_critical(kept.len(), 0.01);
        assert!(d < crit, "bandwidth KS {d} exceeds {crit}");
    }

    #[test]
    fn predictions_reproduce_observed_counts_at_coincident_locations() {
        let locs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let counts = vec![1u64, 2, 3, 3, 2, 1];
        let data = CountSeries::new(locs.clone(), counts.clone()).unwrap();
        let draws = gp_fit(&data, &quick_cfg(9)).unwrap();

        // Grid interleaves the observed locations with midpoints.
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let ts = draws.thresholds().clone();
        for pred in [
            gp_predict(&draws, &grid, 77).unwrap(),
            gp_predict_pointwise(&draws, &grid, 78).unwrap(),
        ] {
            assert_eq!(pred.n_draws(), draws.n_draws());
            for path in pred.paths() {
                for (i, &y) in counts.iter().enumerate() {
                    let g = 2 * i; // grid index of the i-th observed location
                    assert_eq!(
                        round_value(path[g], &ts).unwrap(),
                        y,
                        "coincident location {} not pinned",
                        locs[i]
                    );
                }
            }
            let med = posterior_median_series(&pred).unwrap();
            for (i, &y) in counts.iter().enumerate() {
                assert_eq!(med[2 * i], y);
            }
        }
    }

    #[test]
    fn joint_and_pointwise_predictions_share_their_mean_curve() {
        let locs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let counts = vec![0u64, 1, 2, 4, 4, 2, 1, 0];
        let data = CountSeries::new(locs, counts).unwrap();
        let draws = gp_fit(&data, &quick_cfg(21)).unwrap();
        let grid: Vec<f64> = (0..15).map(|i| 0.25 + i as f64 * 0.5).collect();

        let cond_mean = gp_conditional_mean_series(&draws, &grid).unwrap();
        let joint = gp_predict(&draws, &grid, 1).unwrap();
        let pointwise = gp_predict_pointwise(&draws, &grid, 2).unwrap();
        let m_joint = joint.latent_mean_series();
        let m_pw = pointwise.latent_mean_series();
        for g in 0..grid.len() {
            // Both averages equal the conditional mean curve up to the noise
            // of a few hundred draws.
            assert!(
                (m_joint[g] - cond_mean[g]).abs() < 0.8,
                "joint mean deviates at {g}: {} vs {}",
                m_joint[g],
                cond_mean[g]
            );
            assert!(
                (m_pw[g] - cond_mean[g]).abs() < 0.8,
                "pointwise mean deviates at {g}: {} vs {}",
                m_pw[g],
                cond_mean[g]
            );
        }
    }

    #[test]
    fn continuous_fit_interpolates_data_in_conditional_mean() {
        // Two-stage first stage: latent fixed at the observed values, so the
        // conditional mean at an observed location reproduces it (up to the
        // factorization jitter).
        let locs: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let vals = vec![2.0, 3.0, 5.0, 3.0, 2.0];
        let data = LatentSeries::new(locs.clone(), vals.clone()).unwrap();
        let cfg = GpConfig {
            n_iter: 200,
            burn_in: 50,
            seed: 3,
            ..GpConfig::default()
        };
        let draws = gp_fit_continuous(&data, &cfg).unwrap();
        let mean = gp_conditional_mean_series(&draws, &locs).unwrap();
        for (m, v) in mean.iter().zip(&vals) {
            assert!((m - v).abs() < 1e-4, "conditional mean {m} vs observed {v}");
        }
    }
}
