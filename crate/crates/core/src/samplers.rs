//! Seeded random streams and the primitive draws used by every model fit.
//!
//! All stochastic code in this crate draws through [`RngStream`], a counter
//! based generator that reproduces the same sequence for the same seed on
//! every platform and can spawn independent child streams for parallel work.
//! On top of it sit the distributional primitives: interval-truncated normal
//! draws, rectangle-restricted multivariate normal updates (a slice sampler
//! with a coordinatewise sweep), gamma draws, and a scalar random-walk
//! Metropolis-Hastings step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::normal;

/// Standardized distance from the mean beyond which truncated normal draws
/// switch to the complementary (upper-tail) parameterization.
const TAIL_Z: f64 = 5.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reproducible random stream: identical seeds yield identical draw
/// sequences, and [`RngStream::derive`] spawns statistically independent
/// child streams from a tag (used to give each replicate, subject, or worker
/// its own stream without sharing state).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream from a tag. The child depends only
    /// on `(seed, tag)`, never on how much of the parent stream has been
    /// consumed, so derivations are safe to reorder or parallelize.
    pub fn derive(&self, tag: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(tag)))
    }

    /// One standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Axis-aligned region `prod_i [lower_i, upper_i)`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rectangle {
    /// Builds a rectangle; every coordinate needs `lower < upper` and neither
    /// bound may be NaN.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::domain(
                "rectangle bounds must be non-empty and aligned",
            ));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::domain(format!("rectangle bound {i} is NaN")));
            }
            if !(lo < hi) {
                return Err(Error::domain(format!(
                    "rectangle coordinate {i} is empty: [{lo}, {hi})"
                )));
            }
        }
        Ok(Rectangle { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Membership with the half-open convention `lower <= x < upper`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| lo <= v && v < hi)
    }

    /// Midpoint of each coordinate, with infinite sides replaced by a point
    /// one unit inside the finite bound (zero if both sides are infinite).
    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    }
}

/// Largest double strictly below `x` (identity on `-inf` and NaN).
fn next_below(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    if x == 0.0 {
        return -f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits - 1)
    } else {
        f64::from_bits(bits + 1)
    }
}

/// Draws from a normal distribution restricted to `[lo, hi)` by inversion of
/// the cdf, switching to the complementary parameterization when the interval
/// sits deep in a tail so that draws stay accurate arbitrarily far out.
pub fn sample_truncnorm(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if !mean.is_finite() || !(sd.is_finite() && sd > 0.0) {
        return Err(Error::domain(format!(
            "truncated normal needs finite mean and positive sd, got mean={mean} sd={sd}"
        )));
    }
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::domain(format!(
            "truncation interval [{lo}, {hi}) is empty or invalid"
        )));
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = if a >= TAIL_Z {
        upper_tail_draw(a, b, rng)?
    } else if b <= -TAIL_Z {
        -upper_tail_draw(-b, -a, rng)?
    } else {
        let pa = normal::cdf(a);
        let pb = normal::cdf(b);
        if pa < pb {
            normal::quantile(rng.gen_range(pa..pb))
        } else {
            // The interval is narrower than cdf resolution; every point of it
            // is the same draw to within float precision.
            0.5 * (a.max(-TAIL_Z) + b.min(TAIL_Z))
        }
    };
    let mut x = mean + sd * z;
    if x < lo {
        x = lo;
    }
    if x >= hi {
        x = next_below(hi);
    }
    debug_assert!(lo <= x && x < hi, "truncated draw {x} left [{lo}, {hi})");
    Ok(x)
}

/// Upper-tail truncated standard normal on `[a, b)` with `a >= TAIL_Z`,
/// via inversion of the survival function; falls back to an exponential
/// rejection scheme when even the survival function underflows.
fn upper_tail_draw(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    let qa = normal::sf(a);
    let qb = if b.is_finite() { normal::sf(b) } else { 0.0 };
    if qa > qb && qa.is_normal() {
        return Ok(normal::sf_quantile(rng.gen_range(qb..qa)));
    }
    // Survival probabilities have underflown; sample the tail by exponential
    // majorization instead.
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..100_000 {
        let u: f64 = rng.uniform();
        let z = a - (1.0 - u).ln() / alpha;
        let accept: f64 = rng.uniform();
        if z < b && accept <= (-(z - alpha) * (z - alpha) / 2.0).exp() {
            return Ok(z);
        }
    }
    Err(Error::numerical(format!(
        "tail rejection sampling failed on [{a}, {b})"
    )))
}

/// Normal law on `R^n` held as a mean vector and precision matrix, prepared
/// for rectangle-restricted sampling.
#[derive(Debug, Clone)]
pub struct MvnParams {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    diagonal: bool,
}

impl MvnParams {
    /// Builds the parameters from a covariance matrix; the matrix is
    /// factorized (with the jitter ladder) and inverted to a precision.
    pub fn from_covariance(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::domain("covariance dimensions must match the mean"));
        }
        check_symmetric(&covariance)?;
        let off_diag_zero = is_diagonal(&covariance);
        let precision = if off_diag_zero {
            let mut p = DMatrix::zeros(n, n);
            for i in 0..n {
                let v = covariance[(i, i)];
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::domain(format!(
                        "covariance diagonal entry {i} must be positive, got {v}"
                    )));
                }
                p[(i, i)] = 1.0 / v;
            }
            p
        } else {
            let (chol, _) = cholesky_with_jitter(&covariance)?;
            chol.inverse()
        };
        Ok(MvnParams {
            mean,
            precision,
            diagonal: off_diag_zero,
        })
    }

    /// Builds the parameters directly from a precision matrix (the form the
    /// model fits already hold); the matrix must be symmetric with a strictly
    /// positive diagonal.
    pub fn from_precision(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if precision.nrows() != n || precision.ncols() != n {
            return Err(Error::domain("precision dimensions must match the mean"));
        }
        check_symmetric(&precision)?;
        for i in 0..n {
            let v = precision[(i, i)];
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "precision diagonal entry {i} must be positive, got {v}"
                )));
            }
        }
        let diagonal = is_diagonal(&precision);
        Ok(MvnParams {
            mean,
            precision,
            diagonal,
        })
    }

    /// Crate-internal constructor that skips validation. Callers guarantee
    /// the precision is symmetric positive definite and that `diagonal`
    /// accurately describes it.
    pub(crate) fn trusted(mean: DVector<f64>, precision: DMatrix<f64>, diagonal: bool) -> Self {
        MvnParams {
            mean,
            precision,
            diagonal,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if !m[(i, j)].is_finite() || (m[(i, j)] - m[(j, i)]).abs() > 1e-8 * scale {
                return Err(Error::domain(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// One update of a multivariate normal draw restricted to a rectangle.
///
/// A slice level is drawn against the Gaussian kernel at the current point;
/// one full coordinatewise sweep then moves each coordinate uniformly over
/// the intersection of the slice with the rectangle. The update leaves the
/// restricted normal law invariant. When the precision is diagonal the
/// coordinates are independent and are redrawn exactly from their truncated
/// normal laws instead.
pub fn sample_tmvn_slice(
    params: &MvnParams,
    rect: &Rectangle,
    current: &DVector<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let n = params.dim();
    if rect.dim() != n || current.len() != n {
        return Err(Error::domain(format!(
            "dimension mismatch: params {n}, rectangle {}, current {}",
            rect.dim(),
            current.len()
        )));
    }
    if !rect.contains(current.as_slice()) {
        return Err(Error::domain(
            "current point must lie inside the rectangle",
        ));
    }

    if params.diagonal {
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let sd = 1.0 / params.precision[(i, i)].sqrt();
            out[i] = sample_truncnorm(
                params.mean[i],
                sd,
                rect.lower[i],
                rect.upper[i],
                rng,
            )?;
        }
        return Ok(out);
    }

    let a = &params.precision;
    let mut x = current.clone();
    let d = &x - &params.mean;
    let mut g = a * &d;
    let mut q = d.dot(&g);
    let v: f64 = rng.uniform().max(1e-300);
    let c = q - 2.0 * v.ln();
    for i in 0..n {
        let aii = a[(i, i)];
        let gi = g[i];
        let disc = (gi * gi + aii * (c - q)).max(0.0);
        let s = disc.sqrt();
        let lo = rect.lower[i].max(x[i] + (-gi - s) / aii);
        let hi = rect.upper[i].min(x[i] + (-gi + s) / aii);
        let xnew = if lo < hi { rng.gen_range(lo..hi) } else { x[i] };
        let delta = xnew - x[i];
        if delta != 0.0 {
            q += 2.0 * delta * gi + delta * delta * aii;
            g.axpy(delta, &a.column(i), 1.0);
            x[i] = xnew;
        }
    }
    debug_assert!(
        rect.contains(x.as_slice()),
        "slice update left the rectangle"
    );
    Ok(x)
}

/// One gamma draw in shape/rate parameterization (mean `shape / rate`).
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0) {
        return Err(Error::domain(format!(
            "gamma parameters must be positive, got shape={shape} rate={rate}"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::domain(format!("gamma construction failed: {e}")))?;
    Ok(dist.sample(rng))
}

/// One Gaussian random-walk Metropolis-Hastings step on a scalar
/// log-density. Returns the (possibly unchanged) state and whether the
/// proposal was accepted.
pub fn mh_step(
    log_target: impl Fn(f64) -> f64,
    proposal_sd: f64,
    current: f64,
    rng: &mut RngStream,
) -> Result<(f64, bool)> {
    if !(proposal_sd.is_finite() && proposal_sd > 0.0) {
        return Err(Error::domain(format!(
            "proposal sd must be positive, got {proposal_sd}"
        )));
    }
    if !current.is_finite() {
        return Err(Error::domain(format!(
            "current state must be finite, got {current}"
        )));
    }
    let lt0 = log_target(current);
    if !lt0.is_finite() {
        return Err(Error::domain(format!(
            "log target is not finite at the current state ({lt0})"
        )));
    }
    let proposal = current + proposal_sd * rng.standard_normal();
    let lt1 = log_target(proposal);
    debug_assert!(!lt1.is_nan(), "log target returned NaN at {proposal}");
    let accept = if lt1.is_nan() {
        false
    } else {
        rng.uniform().max(1e-300).ln() < lt1 - lt0
    };
    if accept {
        Ok((proposal, true))
    } else {
        Ok((current, false))
    }
}

/// Cholesky factorization with the jitter ladder: `1e-8` times the largest
/// diagonal entry is added before factorizing, and on failure the jitter is
/// retried 10x larger up to three times. Returns the factor and the jitter
/// actually used.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let maxdiag = matrix
        .diagonal()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if !maxdiag.is_finite() || maxdiag == 0.0 {
        return Err(Error::domain(
            "matrix diagonal must be finite and non-zero for factorization",
        ));
    }
    let mut jitter = 1e-8 * maxdiag;
    for _ in 0..4 {
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::numerical(format!(
        "Cholesky factorization failed even with jitter {:.3e}",
        jitter / 10.0
    )))
}

/// Draw from `N(mean, Q^{-1})` given the Cholesky factor of the precision
/// `Q = L L^T`: returns `mean + L^{-T} z` with standard normal `z`.
pub(crate) fn mvn_from_precision_chol(
    mean: &DVector<f64>,
    precision_chol: &Cholesky<f64, Dyn>,
    rng: &mut RngStream,
) -> DVector<f64> {
    let n = mean.len();
    let z = DVector::from_fn(n, |_, _| rng.standard_normal());
    let w = precision_chol
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .expect("triangular solve on a successful Cholesky factor");
    mean + w
}
