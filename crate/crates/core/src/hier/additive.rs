//! Additive predictor-effect model for daily count series with AR(1) errors.
//!
//! Subject `i` on day `t` has latent value
//! `xi_i + f_1(x_it1) + ... + f_4(x_it4) + e_it`, where each `f_j` is a
//! penalized spline in a (standardized) covariate, the error vector of each
//! subject is `N(0, (1/tau) R(rho))` with AR(1) correlation
//! `R_st = rho^|s-t|`, and subject effects follow a Dirichlet-process prior.
//! Counts are the rounded latent values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hier::dp::{dp_gibbs_update, DpState};
use crate::hier::AdditiveDataset;
use crate::rounding::ThresholdSequence;
use crate::samplers::{
    mh_step, sample_gamma, sample_tmvn_slice, MvnParams, Rectangle, RngStream,
};
use crate::spline::{
    difference_penalty, draw_coefficients, draw_error_precision, draw_smoothing_rate,
    draw_smoothing_weight, penalty_rank, BSplineBasis,
};

/// Number of per-observation covariates the model expects.
pub const N_PREDICTORS: usize = 4;

/// AR(1) correlation matrix `R_st = rho^|s - t|` for a contiguous series of
/// length `n`. Requires `|rho| < 1`.
pub fn ar1_correlation(n: usize, rho: f64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::domain(format!(
            "AR(1) coefficient must satisfy |rho| < 1, got {rho}"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        rho.powi((i as i32 - j as i32).abs())
    }))
}

/// Applies the AR(1) precision `R(rho)^{-1}` to a vector in O(n) using the
/// tridiagonal closed form.
fn ar1_precision_apply(rho: f64, v: &DVector<f64>) -> DVector<f64> {
    let t = v.len();
    if t == 1 {
        return v.clone();
    }
    let c = 1.0 / (1.0 - rho * rho);
    let mut w = DVector::zeros(t);
    w[0] = c * (v[0] - rho * v[1]);
    w[t - 1] = c * (v[t - 1] - rho * v[t - 2]);
    for s in 1..t - 1 {
        w[s] = c * ((1.0 + rho * rho) * v[s] - rho * (v[s - 1] + v[s + 1]));
    }
    w
}

/// Sufficient statistics `(sum r^2, interior sum r^2, lag-1 cross sum)` for
/// AR(1) quadratic forms in a residual vector.
fn ar1_suffstats(r: &DVector<f64>) -> (f64, f64, f64) {
    let t = r.len();
    let s0: f64 = r.iter().map(|v| v * v).sum();
    let s0int: f64 = if t >= 2 {
        r.iter().skip(1).take(t - 2).map(|v| v * v).sum()
    } else {
        0.0
    };
    let s1: f64 = (1..t).map(|s| r[s] * r[s - 1]).sum();
    (s0, s0int, s1)
}

/// Quadratic form `r^T R(rho)^{-1} r` from the sufficient statistics of a
/// length-`t` residual vector.
fn ar1_quad(rho: f64, stats: (f64, f64, f64), t: usize) -> f64 {
    let (s0, s0int, s1) = stats;
    if t == 1 {
        return s0;
    }
    (s0 + rho * rho * s0int - 2.0 * rho * s1) / (1.0 - rho * rho)
}

/// Dense AR(1) precision `tau * R(rho)^{-1}` (tridiagonal). At `rho = 0` all
/// off-diagonal entries are exactly zero, so downstream samplers can take
/// the independent-coordinate path.
fn ar1_precision_dense(rho: f64, tau: f64, t: usize) -> DMatrix<f64> {
    if t == 1 {
        return DMatrix::from_element(1, 1, tau);
    }
    let c = tau / (1.0 - rho * rho);
    let mut p = DMatrix::zeros(t, t);
    for s in 0..t {
        let interior = s > 0 && s < t - 1;
        p[(s, s)] = if interior { c * (1.0 + rho * rho) } else { c };
        if s + 1 < t {
            p[(s, s + 1)] = -rho * c;
            p[(s + 1, s)] = -rho * c;
        }
    }
    p
}

/// Sampler configuration for the additive AR(1) model.
#[derive(Debug, Clone)]
pub struct AdditiveConfig {
    /// Post-burn-in iterations (kept draws are these, thinned).
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Interior knots of each predictor-effect spline.
    pub n_interior_knots: usize,
    pub penalty_order: usize,
    /// Degrees of freedom of the smoothing-weight prior.
    pub nu: f64,
    /// Gamma prior shape and rate on the smoothing-weight rate `delta`.
    pub a_delta: f64,
    pub b_delta: f64,
    /// Dirichlet-process concentration.
    pub alpha: f64,
    /// Gamma prior shape and rate on the base-measure precision `psi`.
    pub a_psi: f64,
    pub b_psi: f64,
    pub init_tau: f64,
    pub init_lambda: f64,
    pub init_delta: f64,
    pub init_psi: f64,
    /// Starting value of the AR(1) coefficient, in (-1, 1).
    pub init_rho: f64,
    pub thresholds: ThresholdSequence,
}

impl Default for AdditiveConfig {
    fn default() -> Self {
        AdditiveConfig {
            n_iter: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            n_interior_knots: 20,
            penalty_order: 2,
            nu: 1.0,
            a_delta: 1.0,
            b_delta: 1.0,
            alpha: 1.0,
            a_psi: 1.0,
            b_psi: 1.0,
            init_tau: 1.0,
            init_lambda: 1.0,
            init_delta: 1.0,
            init_psi: 1.0,
            init_rho: 0.0,
            thresholds: ThresholdSequence::standard(),
        }
    }
}

impl AdditiveConfig {
    pub(crate) fn validate(&self) -> Result<()> {
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
        if !(self.init_rho.is_finite() && self.init_rho.abs() < 1.0) {
            return Err(Error::domain(format!(
                "init_rho must satisfy |rho| < 1, got {}",
                self.init_rho
            )));
        }
        for (name, v) in [
            ("nu", self.nu),
            ("a_delta", self.a_delta),
            ("b_delta", self.b_delta),
            ("alpha", self.alpha),
            ("a_psi", self.a_psi),
            ("b_psi", self.b_psi),
            ("init_tau", self.init_tau),
            ("init_lambda", self.init_lambda),
            ("init_delta", self.init_delta),
            ("init_psi", self.init_psi),
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

/// Kept draws from an additive AR(1) fit.
#[derive(Debug, Clone)]
pub struct AdditiveDraws {
    bases: Vec<BSplineBasis>,
    /// Pooled mean and standard deviation used to standardize each predictor.
    standardize: [(f64, f64); N_PREDICTORS],
    thresholds: ThresholdSequence,
    /// `theta[draw][predictor]` is that effect's coefficient vector.
    theta: Vec<Vec<DVector<f64>>>,
    tau: Vec<f64>,
    rho: Vec<f64>,
    lambda: Vec<f64>,
    delta: Vec<f64>,
    psi: Vec<f64>,
    /// `xi[draw][subject]` is that subject's random effect.
    xi: Vec<Vec<f64>>,
    mu_q: Vec<f64>,
    n_clusters: Vec<usize>,
    accept_rate_rho: f64,
}

impl AdditiveDraws {
    pub fn n_draws(&self) -> usize {
        self.tau.len()
    }

    /// One basis per predictor, on the standardized scale.
    pub fn bases(&self) -> &[BSplineBasis] {
        &self.bases
    }

    /// `(mean, sd)` used to standardize each predictor.
    pub fn standardize(&self) -> &[(f64, f64); N_PREDICTORS] {
        &self.standardize
    }

    pub fn thresholds(&self) -> &ThresholdSequence {
        &self.thresholds
    }

    /// Coefficient draws, indexed `[draw][predictor]`.
    pub fn theta(&self) -> &[Vec<DVector<f64>>] {
        &self.theta
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn xi(&self) -> &[Vec<f64>] {
        &self.xi
    }

    pub fn mu_q(&self) -> &[f64] {
        &self.mu_q
    }

    pub fn n_clusters(&self) -> &[usize] {
        &self.n_clusters
    }

    pub fn accept_rate_rho(&self) -> f64 {
        self.accept_rate_rho
    }

    /// Draws object with frozen parameter values, for exercising summaries
    /// against closed-form expectations.
    #[cfg(test)]
    pub(crate) fn frozen(
        bases: Vec<BSplineBasis>,
        standardize: [(f64, f64); N_PREDICTORS],
        theta: Vec<Vec<DVector<f64>>>,
        tau: Vec<f64>,
        mu_q: Vec<f64>,
    ) -> Self {
        let n = tau.len();
        AdditiveDraws {
            bases,
            standardize,
            thresholds: ThresholdSequence::standard(),
            theta,
            tau,
            rho: vec![0.0; n],
            lambda: vec![1.0; n],
            delta: vec![1.0; n],
            psi: vec![1.0; n],
            xi: vec![vec![0.0]; n],
            mu_q,
            n_clusters: vec![1; n],
            accept_rate_rho: 0.0,
        }
    }
}

/// Per-subject, per-predictor design pieces for the GLS coefficient update:
/// the Gram pieces of `B^T R^{-1} B` split by their dependence on `rho`.
struct DesignBlocks {
    b: DMatrix<f64>,
    /// `B^T B`
    m0: DMatrix<f64>,
    /// `B^T E B` with `E` selecting interior rows.
    me: DMatrix<f64>,
    /// `B^T (L + L^T) B` with `L` the lag-1 shift.
    ml: DMatrix<f64>,
}

impl DesignBlocks {
    fn new(b: DMatrix<f64>) -> Self {
        let t = b.nrows();
        let m0 = b.transpose() * &b;
        let mut me = DMatrix::zeros(b.ncols(), b.ncols());
        for s in 1..t.saturating_sub(1) {
            let row = b.row(s);
            me += row.transpose() * row;
        }
        let mut ml = DMatrix::zeros(b.ncols(), b.ncols());
        for s in 1..t {
            let cross = b.row(s).transpose() * b.row(s - 1);
            ml += &cross + cross.transpose();
        }
        DesignBlocks { b, m0, me, ml }
    }

    /// `B^T R(rho)^{-1} B` assembled from the cached pieces.
    fn gram(&self, rho: f64) -> DMatrix<f64> {
        let t = self.b.nrows();
        if t == 1 {
            return self.m0.clone();
        }
        let c = 1.0 / (1.0 - rho * rho);
        let mut g = self.m0.clone();
        g.zip_zip_apply(&self.me, &self.ml, |a, e, l| {
            *a = c * (*a + rho * rho * e - rho * l)
        });
        g
    }
}

/// Fits the additive AR(1) model by Gibbs sampling with a random-walk
/// Metropolis update for `rho` on the atanh scale (uniform prior on (-1, 1)).
pub fn fit_additive_ar1(data: &AdditiveDataset, cfg: &AdditiveConfig) -> Result<AdditiveDraws> {
    cfg.validate()?;
    let ts = &cfg.thresholds;
    let n_subjects = data.n_subjects();
    let n_total = data.n_obs_total();

    // Standardize each predictor by its pooled mean and standard deviation.
    let mut standardize = [(0.0f64, 1.0f64); N_PREDICTORS];
    for j in 0..N_PREDICTORS {
        let mut vals = Vec::with_capacity(n_total);
        for s in data.subjects() {
            vals.extend(s.covariates().iter().map(|c| c[j]));
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
        if !(var > 0.0) {
            return Err(Error::domain(format!(
                "predictor {} is constant; cannot standardize",
                j + 1
            )));
        }
        standardize[j] = (m, var.sqrt());
    }

    // One basis per predictor over its standardized observed range.
    let mut bases = Vec::with_capacity(N_PREDICTORS);
    for j in 0..N_PREDICTORS {
        let (m, sd) = standardize[j];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in data.subjects() {
            for c in s.covariates() {
                let z = (c[j] - m) / sd;
                lo = lo.min(z);
                hi = hi.max(z);
            }
        }
        bases.push(BSplineBasis::cubic_equispaced(lo, hi, cfg.n_interior_knots)?);
    }
    let k = bases[0].n_basis();
    let penalty = difference_penalty(k, cfg.penalty_order)?;
    let rank = penalty_rank(k, cfg.penalty_order) as f64;

    // Per-subject design blocks, count rectangles, and initial latents.
    let mut blocks: Vec<Vec<DesignBlocks>> = Vec::with_capacity(n_subjects);
    let mut rects = Vec::with_capacity(n_subjects);
    let mut latent: Vec<DVector<f64>> = Vec::with_capacity(n_subjects);
    for s in data.subjects() {
        let mut per_pred = Vec::with_capacity(N_PREDICTORS);
        for j in 0..N_PREDICTORS {
            let (m, sd) = standardize[j];
            let zs: Vec<f64> = s.covariates().iter().map(|c| (c[j] - m) / sd).collect();
            per_pred.push(DesignBlocks::new(bases[j].design_matrix(&zs)));
        }
        blocks.push(per_pred);
        let lower: Vec<f64> = s.counts().iter().map(|&y| ts.lower(y)).collect();
        let upper: Vec<f64> = s.counts().iter().map(|&y| ts.upper(y)).collect();
        rects.push(Rectangle::new(lower, upper)?);
        latent.push(DVector::from_iterator(
            s.len(),
            s.counts().iter().map(|&y| ts.interval_center(y)),
        ));
    }

    let mut rng = RngStream::new(cfg.seed);
    let mut theta: Vec<DVector<f64>> = (0..N_PREDICTORS).map(|_| DVector::zeros(k)).collect();
    let mut fitted: Vec<Vec<DVector<f64>>> = blocks
        .iter()
        .map(|per| per.iter().map(|blk| &blk.b * &theta[0]).collect())
        .collect();
    let mut xi = vec![0.0f64; n_subjects];
    let mut dp_state = DpState::new(n_subjects)?;
    let mut tau = cfg.init_tau;
    let mut rho = cfg.init_rho;
    let mut lambda = cfg.init_lambda;
    let mut delta = cfg.init_delta;
    let mut psi = cfg.init_psi;

    let kept_cap = cfg.n_iter.div_ceil(cfg.thin);
    let mut out = AdditiveDraws {
        bases,
        standardize,
        thresholds: ts.clone(),
        theta: Vec::with_capacity(kept_cap),
        tau: Vec::with_capacity(kept_cap),
        rho: Vec::with_capacity(kept_cap),
        lambda: Vec::with_capacity(kept_cap),
        delta: Vec::with_capacity(kept_cap),
        psi: Vec::with_capacity(kept_cap),
        xi: Vec::with_capacity(kept_cap),
        mu_q: Vec::with_capacity(kept_cap),
        n_clusters: Vec::with_capacity(kept_cap),
        accept_rate_rho: 0.0,
    };

    let mut obs_mean = vec![0.0f64; n_subjects];
    let mut obs_prec = vec![0.0f64; n_subjects];
    let mut rho_sd = 0.3f64;
    let mut rho_attempts = 0usize;
    let mut rho_accepts = 0usize;
    let mut window_attempts = 0usize;
    let mut window_accepts = 0usize;
    let total = cfg.burn_in + cfg.n_iter;

    for iter in 0..total {
        // (i) latent vectors per subject: truncated multivariate normal with
        // mean xi + sum_j f_j and precision tau * R^{-1}, sampled by one
        // slice sweep (exact coordinatewise update when rho = 0).
        for i in 0..n_subjects {
            let t_i = latent[i].len();
            let mut mean = DVector::from_element(t_i, xi[i]);
            for j in 0..N_PREDICTORS {
                mean += &fitted[i][j];
            }
            let params = MvnParams::trusted(mean, ar1_precision_dense(rho, tau, t_i), rho == 0.0);
            latent[i] = sample_tmvn_slice(&params, &rects[i], &latent[i], &mut rng)?;
        }
        // (ii) each predictor's coefficients from its GLS conditional.
        for j in 0..N_PREDICTORS {
            let mut btb = DMatrix::zeros(k, k);
            let mut bty = DVector::zeros(k);
            for i in 0..n_subjects {
                btb += blocks[i][j].gram(rho);
                let mut partial = latent[i].clone();
                partial.add_scalar_mut(-xi[i]);
                for l in 0..N_PREDICTORS {
                    if l != j {
                        partial -= &fitted[i][l];
                    }
                }
                bty += blocks[i][j].b.transpose() * ar1_precision_apply(rho, &partial);
            }
            theta[j] = draw_coefficients(&btb, &bty, tau, lambda, &penalty, &mut rng)?;
            for i in 0..n_subjects {
                fitted[i][j] = &blocks[i][j].b * &theta[j];
            }
        }
        // (iii) subject effects via the urn, then the base-measure precision.
        for i in 0..n_subjects {
            let mut resid = latent[i].clone();
            for j in 0..N_PREDICTORS {
                resid -= &fitted[i][j];
            }
            let t_i = resid.len() as f64;
            let ones = DVector::from_element(resid.len(), 1.0);
            let rinv_ones = ar1_precision_apply(rho, &ones);
            let denom = rinv_ones.sum().max(1e-12 * t_i);
            obs_mean[i] = ar1_precision_apply(rho, &resid).sum() / denom;
            obs_prec[i] = tau * denom;
        }
        dp_gibbs_update(&mut dp_state, &obs_mean, &obs_prec, cfg.alpha, psi, &mut rng)?;
        for (i, x) in dp_state.effects().into_iter().enumerate() {
            xi[i] = x;
        }
        let mu_q = dp_state.mean_effect();
        let n_clusters = dp_state.n_clusters();
        psi = sample_gamma(
            cfg.a_psi + 0.5 * n_clusters as f64,
            cfg.b_psi + 0.5 * dp_state.atom_sum_sq(),
            &mut rng,
        )?;
        // (iv) error precision from the GLS residual sum of squares.
        let mut stats_per_subject = Vec::with_capacity(n_subjects);
        let mut wrss = 0.0;
        for i in 0..n_subjects {
            let mut resid = latent[i].clone();
            resid.add_scalar_mut(-xi[i]);
            for j in 0..N_PREDICTORS {
                resid -= &fitted[i][j];
            }
            let stats = ar1_suffstats(&resid);
            wrss += ar1_quad(rho, stats, resid.len());
            stats_per_subject.push((stats, resid.len()));
        }
        tau = draw_error_precision(wrss, n_total, &mut rng)?;
        // (v) AR(1) coefficient by random-walk Metropolis on z = atanh(rho);
        // the uniform(-1, 1) prior contributes the Jacobian ln(1 - rho^2).
        let tau_now = tau;
        let log_target = |z: f64| {
            let r = z.tanh();
            let one_minus = 1.0 - r * r;
            if one_minus <= 1e-12 {
                return f64::NEG_INFINITY;
            }
            let mut lp = one_minus.ln();
            for &(stats, t_i) in &stats_per_subject {
                lp += -0.5 * (t_i.saturating_sub(1) as f64) * one_minus.ln()
                    - 0.5 * tau_now * ar1_quad(r, stats, t_i);
            }
            lp
        };
        let (z_new, accepted) = mh_step(log_target, rho_sd, rho.atanh(), &mut rng)?;
        rho = z_new.tanh();
        rho_attempts += 1;
        window_attempts += 1;
        if accepted {
            rho_accepts += 1;
            window_accepts += 1;
        }
        if iter < cfg.burn_in && window_attempts == 50 {
            let rate = window_accepts as f64 / window_attempts as f64;
            if rate < 0.25 {
                rho_sd *= 0.7;
            } else if rate > 0.45 {
                rho_sd *= 1.4;
            }
            rho_sd = rho_sd.clamp(1e-3, 10.0);
            window_attempts = 0;
            window_accepts = 0;
        }
        // (vi) smoothing weight shared across the four effects, and its rate.
        let mut roughness = 0.0;
        for th in &theta {
            roughness += th.dot(&(&penalty * th)).max(0.0);
        }
        lambda = draw_smoothing_weight(
            roughness,
            N_PREDICTORS as f64 * rank,
            cfg.nu,
            delta,
            &mut rng,
        )?;
        delta = draw_smoothing_rate(lambda, cfg.nu, cfg.a_delta, cfg.b_delta, &mut rng)?;

        if iter >= cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0 {
            out.theta.push(theta.clone());
            out.tau.push(tau);
            out.rho.push(rho);
            out.lambda.push(lambda);
            out.delta.push(delta);
            out.psi.push(psi);
            out.xi.push(xi.clone());
            out.mu_q.push(mu_q);
            out.n_clusters.push(n_clusters);
        }
    }
    out.accept_rate_rho = rho_accepts as f64 / rho_attempts.max(1) as f64;
    Ok(out)
}
