//! Rounded penalized B-spline regression.
//!
//! The latent path is `y*_i = b(s_i)^T theta + eps_i` with a cubic B-spline
//! basis `b` (equispaced interior knots over the observed range), iid
//! Gaussian errors of precision `tau`, and a difference penalty on the
//! coefficients: `p(theta | lambda) ~ exp(-lambda * theta^T P theta / 2)`
//! with `P = D^T D` for the order-`d` difference operator `D`. The
//! smoothing weight gets a hierarchical gamma prior, `lambda | delta ~
//! Gamma(nu/2, nu delta/2)` and `delta ~ Gamma(a_delta, b_delta)`, and the
//! error precision the scale-invariant prior `p(tau) ~ 1/tau`.
//!
//! Every full conditional is available in closed form, so the fit is a plain
//! Gibbs sampler; the latent values are conditionally independent truncated
//! normals given the coefficients. [`rpspline_fit_continuous`] fits the same
//! regression to directly observed continuous values (first stage of the
//! two-stage baseline).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::predict::PredictiveDraws;
use crate::rounding::{CountSeries, LatentSeries, ThresholdSequence};
use crate::samplers::{
    cholesky_with_jitter, mvn_from_precision_chol, sample_gamma, sample_truncnorm, RngStream,
};

/// Cubic B-spline basis on clamped equispaced knots.
#[derive(Debug, Clone)]
pub struct BSplineBasis {
    degree: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Cubic basis over `[lo, hi]` with `n_interior` equispaced interior
    /// knots; the boundary knots are repeated to full multiplicity, giving
    /// `n_interior + 4` basis functions.
    pub fn cubic_equispaced(lo: f64, hi: f64, n_interior: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!(
                "spline range [{lo}, {hi}] must be finite and non-degenerate"
            )));
        }
        let degree = 3usize;
        let mut knots = Vec::with_capacity(2 * (degree + 1) + n_interior);
        knots.extend(std::iter::repeat(lo).take(degree + 1));
        let step = (hi - lo) / (n_interior + 1) as f64;
        knots.extend((1..=n_interior).map(|i| lo + i as f64 * step));
        knots.extend(std::iter::repeat(hi).take(degree + 1));
        Ok(BSplineBasis { degree, knots })
    }

    /// Number of basis functions.
    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Domain the basis was built on.
    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().expect("non-empty knots"))
    }

    /// All basis values at `x`. Points outside the range are clamped to it,
    /// which extrapolates with the constant boundary value.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        let (span, vals) = self.eval_nonzero(x);
        for (r, &v) in vals.iter().enumerate() {
            out[span - self.degree + r] = v;
        }
        out
    }

    /// Knot span and the `degree + 1` non-zero basis values at `x`.
    fn eval_nonzero(&self, x: f64) -> (usize, Vec<f64>) {
        let d = self.degree;
        let (lo, hi) = self.range();
        let x = x.clamp(lo, hi);
        // Last index i with knots[i] <= x and knots[i] < hi, restricted to
        // the non-degenerate spans [knots[d], knots[len - d - 1]].
        let last_span = self.knots.len() - d - 2;
        let span = if x >= hi {
            last_span
        } else {
            let idx = self.knots.partition_point(|&t| t <= x) - 1;
            idx.clamp(d, last_span)
        };

        let mut vals = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        vals[0] = 1.0;
        for j in 1..=d {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        (span, vals)
    }

    /// Design matrix with one row of basis values per location.
    pub fn design_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        let k = self.n_basis();
        let mut b = DMatrix::zeros(xs.len(), k);
        for (i, &x) in xs.iter().enumerate() {
            let (span, vals) = self.eval_nonzero(x);
            for (r, &v) in vals.iter().enumerate() {
                b[(i, span - self.degree + r)] = v;
            }
        }
        b
    }
}

/// Order-`order` difference penalty `P = D^T D` on `k` coefficients. `D` has
/// `k - order` rows, so `P` has rank `k - order` and its null space is the
/// polynomial sequences of degree below `order`.
pub fn difference_penalty(k: usize, order: usize) -> Result<DMatrix<f64>> {
    if order == 0 || k <= order {
        return Err(Error::domain(format!(
            "difference penalty needs 0 < order < k, got order={order} k={k}"
        )));
    }
    // Build D by repeated first differences.
    let mut d = DMatrix::<f64>::identity(k, k);
    for step in 0..order {
        let rows = k - step - 1;
        let mut next = DMatrix::zeros(rows, k);
        for i in 0..rows {
            for j in 0..k {
                next[(i, j)] = d[(i + 1, j)] - d[(i, j)];
            }
        }
        d = next;
    }
    Ok(d.transpose() * d)
}

/// Rank of the order-`order` difference penalty on `k` coefficients.
pub fn penalty_rank(k: usize, order: usize) -> usize {
    k.saturating_sub(order)
}

/// Sampler configuration for the penalized-spline fits.
#[derive(Debug, Clone)]
pub struct RpsplineConfig {
    /// Post-burn-in iterations (kept draws are these, thinned).
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_interior_knots: usize,
    pub penalty_order: usize,
    /// Degrees of freedom of the smoothing-weight prior.
    pub nu: f64,
    /// Gamma prior shape and rate on the smoothing-weight rate `delta`.
    pub a_delta: f64,
    pub b_delta: f64,
    pub init_tau: f64,
    pub init_lambda: f64,
    pub init_delta: f64,
    pub thresholds: ThresholdSequence,
}

impl Default for RpsplineConfig {
    fn default() -> Self {
        RpsplineConfig {
            n_iter: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            n_interior_knots: 20,
            penalty_order: 2,
            nu: 1.0,
            a_delta: 1.0,
            b_delta: 1.0,
            init_tau: 1.0,
            init_lambda: 1.0,
            init_delta: 1.0,
            thresholds: ThresholdSequence::standard(),
        }
    }
}

impl RpsplineConfig {
    fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin == 0 {
            return Err(Error::domain("n_iter and thin must be at least 1"));
        }
        let k = self.n_interior_knots + 4;
        if self.penalty_order == 0 || self.penalty_order >= k {
            return Err(Error::domain(format!(
                "penalty order {} incompatible with {k} basis functions",
                self.penalty_order
            )));
        }
        for (name, v) in [
            ("nu", self.nu),
            ("a_delta", self.a_delta),
            ("b_delta", self.b_delta),
            ("init_tau", self.init_tau),
            ("init_lambda", self.init_lambda),
            ("init_delta", self.init_delta),
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

/// Kept draws from a penalized-spline fit.
#[derive(Debug, Clone)]
pub struct RpsplineDraws {
    basis: BSplineBasis,
    thresholds: ThresholdSequence,
    theta: Vec<DVector<f64>>,
    tau: Vec<f64>,
    lambda: Vec<f64>,
    delta: Vec<f64>,
}

impl RpsplineDraws {
    pub fn n_draws(&self) -> usize {
        self.tau.len()
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn thresholds(&self) -> &ThresholdSequence {
        &self.thresholds
    }

    /// Kept coefficient draws.
    pub fn theta(&self) -> &[DVector<f64>] {
        &self.theta
    }

    /// Kept error-precision draws.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Kept smoothing-weight draws.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Kept smoothing-rate draws.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }
}

/// One draw of the coefficients from their Gaussian full conditional
/// `N(Q^{-1} tau B^T y*, Q^{-1})` with `Q = tau B^T B + lambda P`.
/// One Gibbs draw of the coefficient vector from its Gaussian full
/// conditional: precision `tau * B^T B + lambda * P`, mean the corresponding
/// ridge solution of `tau * B^T y`. `btb` is the Gram matrix of the design
/// and `bty` the design-weighted data vector.
pub fn draw_coefficients(
    btb: &DMatrix<f64>,
    bty: &DVector<f64>,
    tau: f64,
    lambda: f64,
    penalty: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let mut q = btb.scale(tau);
    q.zip_apply(penalty, |a, b| *a += lambda * b);
    let (chol, _) = cholesky_with_jitter(&q)?;
    let mean = chol.solve(&bty.scale(tau));
    Ok(mvn_from_precision_chol(&mean, &chol, rng))
}

/// One draw of the error precision from its gamma full conditional
/// `Ga(n/2, rss/2)` under the scale-invariant prior `p(tau) ~ 1/tau`.
/// `weighted_rss` is the (possibly correlation-weighted) residual sum of
/// squares and `n_obs` the number of observations behind it.
pub fn draw_error_precision(
    weighted_rss: f64,
    n_obs: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    sample_gamma(
        0.5 * n_obs as f64,
        (0.5 * weighted_rss).max(1e-300),
        rng,
    )
}

/// One draw of the smoothing weight from its gamma full conditional
/// `Ga((nu + rank)/2, (nu*delta + roughness)/2)`, where `roughness` is the
/// summed penalty quadratic form of the coefficient blocks it smooths and
/// `total_rank` the summed penalty rank across those blocks.
pub fn draw_smoothing_weight(
    roughness: f64,
    total_rank: f64,
    nu: f64,
    delta: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    sample_gamma(0.5 * (nu + total_rank), 0.5 * (nu * delta + roughness), rng)
}

/// One draw of the smoothing-weight rate from its gamma full conditional
/// `Ga(a_delta + nu/2, b_delta + nu*lambda/2)`.
pub fn draw_smoothing_rate(
    lambda: f64,
    nu: f64,
    a_delta: f64,
    b_delta: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    sample_gamma(a_delta + 0.5 * nu, b_delta + 0.5 * nu * lambda, rng)
}

struct GibbsState {
    theta: DVector<f64>,
    tau: f64,
    lambda: f64,
    delta: f64,
}

/// Fits the rounded penalized-spline model to a count series.
pub fn rpspline_fit(data: &CountSeries, cfg: &RpsplineConfig) -> Result<RpsplineDraws> {
    cfg.validate()?;
    run_chain(data.locations(), Rounded::Counts(data.counts()), cfg)
}

/// Fits the penalized-spline regression to directly observed continuous
/// values: the latent values are fixed at the data and only the
/// coefficients and hyperparameters are sampled. First stage of the
/// two-stage baseline.
pub fn rpspline_fit_continuous(
    data: &LatentSeries,
    cfg: &RpsplineConfig,
) -> Result<RpsplineDraws> {
    cfg.validate()?;
    run_chain(data.locations(), Rounded::Fixed(data.values()), cfg)
}

enum Rounded<'a> {
    Counts(&'a [u64]),
    Fixed(&'a [f64]),
}

fn run_chain(locations: &[f64], obs: Rounded, cfg: &RpsplineConfig) -> Result<RpsplineDraws> {
    let n = locations.len();
    let lo = locations.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = locations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let basis = BSplineBasis::cubic_equispaced(lo, hi, cfg.n_interior_knots)?;
    let k = basis.n_basis();
    let b = basis.design_matrix(locations);
    let btb = b.transpose() * &b;
    let penalty = difference_penalty(k, cfg.penalty_order)?;
    let rank = penalty_rank(k, cfg.penalty_order) as f64;
    let ts = &cfg.thresholds;

    let mut rng = RngStream::new(cfg.seed);
    let mut state = GibbsState {
        theta: DVector::zeros(k),
        tau: cfg.init_tau,
        lambda: cfg.init_lambda,
        delta: cfg.init_delta,
    };
    // Start the coefficients at a ridge fit to central latent values so the
    // chain opens near the data rather than at zero.
    let centers = DVector::from_iterator(
        n,
        match obs {
            Rounded::Counts(y) => y.iter().map(|&v| ts.interval_center(v)).collect::<Vec<_>>(),
            Rounded::Fixed(v) => v.to_vec(),
        },
    );
    {
        let mut q = btb.clone();
        q.zip_apply(&penalty, |a, b| *a += cfg.init_lambda * b);
        let (chol, _) = cholesky_with_jitter(&q)?;
        state.theta = chol.solve(&(b.transpose() * &centers));
    }

    let kept_cap = cfg.n_iter.div_ceil(cfg.thin);
    let mut out = RpsplineDraws {
        basis,
        thresholds: ts.clone(),
        theta: Vec::with_capacity(kept_cap),
        tau: Vec::with_capacity(kept_cap),
        lambda: Vec::with_capacity(kept_cap),
        delta: Vec::with_capacity(kept_cap),
    };

    let mut latent = centers;
    let total = cfg.burn_in + cfg.n_iter;
    for iter in 0..total {
        // (i) latent values, conditionally independent truncated normals
        // around the current smooth (skipped when the data are continuous)
        let fitted = &b * &state.theta;
        if let Rounded::Counts(y) = obs {
            let sd = 1.0 / state.tau.sqrt();
            for i in 0..n {
                latent[i] = sample_truncnorm(
                    fitted[i],
                    sd,
                    ts.lower(y[i]),
                    ts.upper(y[i]),
                    &mut rng,
                )?;
            }
        }
        // (ii) coefficients
        let bty = b.transpose() * &latent;
        state.theta = draw_coefficients(&btb, &bty, state.tau, state.lambda, &penalty, &mut rng)?;
        // (iii) error precision, scale-invariant prior
        let resid = &latent - &b * &state.theta;
        state.tau = draw_error_precision(resid.norm_squared(), n, &mut rng)?;
        // (iv) smoothing weight
        let roughness = state.theta.dot(&(&penalty * &state.theta)).max(0.0);
        state.lambda =
            draw_smoothing_weight(roughness, rank, cfg.nu, state.delta, &mut rng)?;
        // (v) smoothing rate
        state.delta =
            draw_smoothing_rate(state.lambda, cfg.nu, cfg.a_delta, cfg.b_delta, &mut rng)?;

        if iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 {
            out.theta.push(state.theta.clone());
            out.tau.push(state.tau);
            out.lambda.push(state.lambda);
            out.delta.push(state.delta);
        }
    }
    Ok(out)
}

/// Posterior predictive draws of the latent path on a grid: each kept draw
/// contributes its smooth `b(s)^T theta` plus a fresh error draw per grid
/// point.
pub fn rpspline_predict(
    draws: &RpsplineDraws,
    grid: &[f64],
    seed: u64,
) -> Result<PredictiveDraws> {
    if grid.is_empty() {
        return Err(Error::domain("prediction grid must be non-empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("prediction grid must be finite"));
    }
    let bg = draws.basis.design_matrix(grid);
    let mut rng = RngStream::new(seed);
    let mut paths = Vec::with_capacity(draws.n_draws());
    for kdraw in 0..draws.n_draws() {
        let smooth = &bg * &draws.theta[kdraw];
        let sd = 1.0 / draws.tau[kdraw].sqrt();
        let path: Vec<f64> = (0..grid.len())
            .map(|g| smooth[g] + sd * rng.standard_normal())
            .collect();
        paths.push(path);
    }
    PredictiveDraws::new(grid.to_vec(), paths, draws.thresholds.clone())
}

/// Posterior mean of the smooth `b(s)^T theta` on a grid (no error draw).
/// This is the point estimate of the two-stage baseline, rounded once at the
/// end instead of per draw.
pub fn pspline_mean_series(draws: &RpsplineDraws, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::domain("prediction grid must be non-empty"));
    }
    let mut theta_bar = DVector::zeros(draws.theta[0].len());
    for th in &draws.theta {
        theta_bar += th;
    }
    theta_bar /= draws.n_draws() as f64;
    let bg = draws.basis.design_matrix(grid);
    Ok((bg * theta_bar).as_slice().to_vec())
}
