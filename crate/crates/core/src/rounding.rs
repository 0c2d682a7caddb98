//! The rounding operator and the count moments it induces.
//!
//! A latent real value `y*` becomes a count through a threshold sequence
//! `a_0 = -inf < a_1 < a_2 < ...`: the observed count is `j` exactly when
//! `y*` falls in `[a_j, a_{j+1})`. The canonical sequence used throughout is
//! `a_1 = 0, a_2 = 1, ...` (unit spacing), under which `y* < 0` reads as
//! count 0 and `y* >= 0` reads as `floor(y*) + 1`; a value sitting exactly on
//! a threshold belongs to the higher count.
//!
//! When the latent value is normal, the count pmf, mean, and covariance have
//! closed forms in terms of normal rectangle probabilities; those induced
//! moments are computed here with tail truncation controlled by an explicit
//! tail probability.

use crate::error::{Error, Result};
use crate::normal;

/// Strictly increasing threshold sequence `a_1 < a_2 < ...` with `a_0 = -inf`.
///
/// The sequence is stored as an explicit head of cut points; beyond the last
/// stored cut the spacing continues at one unit per count. The canonical
/// sequence (`a_j = j - 1`) is [`ThresholdSequence::standard`]; other strictly
/// increasing heads are representable but the models in this crate only
/// exercise the canonical one.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSequence {
    cuts: Vec<f64>,
}

impl ThresholdSequence {
    /// The canonical sequence `a_j = j - 1`: counts are unit-width intervals
    /// starting at zero.
    pub fn standard() -> Self {
        ThresholdSequence { cuts: vec![0.0] }
    }

    /// Builds a sequence from an explicit head of cut points `a_1..a_m`;
    /// spacing continues at one unit beyond `a_m`. The head must be
    /// non-empty, finite, and strictly increasing.
    pub fn from_cuts(cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::domain("threshold sequence needs at least one cut"));
        }
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("threshold cuts must be finite"));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("threshold cuts must be strictly increasing"));
        }
        Ok(ThresholdSequence { cuts })
    }

    /// Lower threshold `a_j` of count `j` (`-inf` for `j = 0`).
    pub fn lower(&self, j: u64) -> f64 {
        if j == 0 {
            return f64::NEG_INFINITY;
        }
        let m = self.cuts.len() as u64;
        if j <= m {
            self.cuts[(j - 1) as usize]
        } else {
            self.cuts[self.cuts.len() - 1] + (j - m) as f64
        }
    }

    /// Upper threshold `a_{j+1}` of count `j`.
    pub fn upper(&self, j: u64) -> f64 {
        self.lower(j + 1)
    }

    /// Central latent value of a count's interval: the midpoint when both
    /// thresholds are finite, half a unit inside the finite threshold
    /// otherwise. Used to initialize latent paths inside their intervals.
    pub fn interval_center(&self, j: u64) -> f64 {
        let lo = self.lower(j);
        let hi = self.upper(j);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 0.5,
            (true, false) => lo + 0.5,
            (false, false) => 0.0,
        }
    }
}

/// Half-open latent interval `[a_j, a_{j+1})` associated with count `j`.
pub fn latent_interval(j: u64, thresholds: &ThresholdSequence) -> (f64, f64) {
    (thresholds.lower(j), thresholds.upper(j))
}

/// Maps a latent value to its count: the `j` with `a_j <= y* < a_{j+1}`.
///
/// Errors on non-finite input and on values so large that the count exceeds
/// the representable range.
pub fn round_value(ystar: f64, thresholds: &ThresholdSequence) -> Result<u64> {
    if !ystar.is_finite() {
        return Err(Error::domain(format!(
            "cannot round non-finite latent value {ystar}"
        )));
    }
    let cuts = &thresholds.cuts;
    if ystar < cuts[0] {
        return Ok(0);
    }
    let last = cuts[cuts.len() - 1];
    if ystar >= last {
        let steps = (ystar - last).floor();
        if steps >= 1.8e19 {
            return Err(Error::domain(format!(
                "latent value {ystar} maps beyond the representable count range"
            )));
        }
        return Ok(cuts.len() as u64 + steps as u64);
    }
    // Inside the explicit head: count = number of cuts <= ystar (a value on a
    // threshold belongs to the higher count).
    Ok(cuts.partition_point(|c| *c <= ystar) as u64)
}

/// A latent continuous path sampled at a finite set of locations.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeries {
    locations: Vec<f64>,
    values: Vec<f64>,
}

impl LatentSeries {
    /// Builds a series; locations and values must be equal-length, non-empty,
    /// and finite.
    pub fn new(locations: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::domain("latent series must be non-empty"));
        }
        if locations.len() != values.len() {
            return Err(Error::domain(format!(
                "latent series length mismatch: {} locations, {} values",
                locations.len(),
                values.len()
            )));
        }
        if locations.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("latent series entries must be finite"));
        }
        Ok(LatentSeries { locations, values })
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Counts observed at a finite set of locations.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    locations: Vec<f64>,
    counts: Vec<u64>,
}

impl CountSeries {
    /// Builds a series; locations must be finite and aligned with the counts.
    pub fn new(locations: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::domain("count series must be non-empty"));
        }
        if locations.len() != counts.len() {
            return Err(Error::domain(format!(
                "count series length mismatch: {} locations, {} counts",
                locations.len(),
                counts.len()
            )));
        }
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("count series locations must be finite"));
        }
        Ok(CountSeries { locations, counts })
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<u64>) {
        (self.locations, self.counts)
    }
}

/// Rounds a latent series elementwise, preserving locations.
pub fn round_series(latent: &LatentSeries, thresholds: &ThresholdSequence) -> Result<CountSeries> {
    let counts = latent
        .values()
        .iter()
        .map(|&v| round_value(v, thresholds))
        .collect::<Result<Vec<u64>>>()?;
    CountSeries::new(latent.locations().to_vec(), counts)
}

/// Normal law of a latent value at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMarginal {
    mean: f64,
    sd: f64,
}

impl GaussianMarginal {
    /// Builds a marginal; the standard deviation must be finite and positive.
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::domain("marginal mean must be finite"));
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::domain(format!("marginal sd must be positive, got {sd}")));
        }
        Ok(GaussianMarginal { mean, sd })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

/// Probability that a normal latent value rounds to count `j`:
/// `F(a_{j+1}) - F(a_j)` under the marginal's cdf.
pub fn marginal_pmf(marginal: &GaussianMarginal, j: u64, thresholds: &ThresholdSequence) -> f64 {
    let zlo = (thresholds.lower(j) - marginal.mean) / marginal.sd;
    let zhi = (thresholds.upper(j) - marginal.mean) / marginal.sd;
    // Work in whichever tail keeps the subtraction well conditioned.
    let p = if zlo > 0.0 {
        normal::sf(zlo) - normal::sf(zhi)
    } else {
        normal::cdf(zhi) - normal::cdf(zlo)
    };
    p.max(0.0)
}

fn check_tail_prob(tail_prob: f64) -> Result<()> {
    if !(tail_prob > 0.0 && tail_prob < 1.0) {
        return Err(Error::domain(format!(
            "tail probability must lie in (0, 1), got {tail_prob}"
        )));
    }
    Ok(())
}

/// Largest count retained when summing induced moments: the count containing
/// the `1 - tail_prob` quantile of the marginal.
fn truncation_count(
    marginal: &GaussianMarginal,
    tail_prob: f64,
    thresholds: &ThresholdSequence,
) -> Result<u64> {
    let z = normal::sf_quantile(tail_prob);
    round_value(marginal.mean + marginal.sd * z, thresholds)
}

/// Mean of the induced count distribution, `sum_j j * pmf_j`, truncated at
/// the `1 - tail_prob` marginal quantile.
pub fn induced_mean(
    marginal: &GaussianMarginal,
    tail_prob: f64,
    thresholds: &ThresholdSequence,
) -> Result<f64> {
    check_tail_prob(tail_prob)?;
    let jmax = truncation_count(marginal, tail_prob, thresholds)?;
    let mut total = 0.0;
    for j in 1..=jmax {
        total += j as f64 * marginal_pmf(marginal, j, thresholds);
    }
    Ok(total)
}

/// Covariance of the induced counts at a pair of locations with jointly
/// normal latent values.
///
/// `cov2x2` is the latent covariance matrix (row-major `[[v1, c], [c, v2]]`);
/// it must be symmetric positive definite. The double sum over count pairs is
/// truncated at the `1 - tail_prob` quantile of each marginal, and each
/// rectangle probability is evaluated by adaptive Gauss-Legendre quadrature
/// with relative tolerance 1e-8.
pub fn induced_cov(
    mean_pair: (f64, f64),
    cov2x2: [[f64; 2]; 2],
    tail_prob: f64,
    thresholds: &ThresholdSequence,
) -> Result<f64> {
    check_tail_prob(tail_prob)?;
    let (m1, m2) = mean_pair;
    let v1 = cov2x2[0][0];
    let v2 = cov2x2[1][1];
    let c = cov2x2[0][1];
    if (cov2x2[0][1] - cov2x2[1][0]).abs() > 1e-12 * (1.0 + c.abs()) {
        return Err(Error::domain("latent covariance matrix must be symmetric"));
    }
    if !(v1 > 0.0 && v2 > 0.0 && v1 * v2 - c * c > 0.0) {
        return Err(Error::domain(
            "latent covariance matrix must be positive definite",
        ));
    }
    let s1 = v1.sqrt();
    let s2 = v2.sqrt();
    let rho = c / (s1 * s2);
    let marg1 = GaussianMarginal::new(m1, s1)?;
    let marg2 = GaussianMarginal::new(m2, s2)?;
    let jmax1 = truncation_count(&marg1, tail_prob, thresholds)?;
    let jmax2 = truncation_count(&marg2, tail_prob, thresholds)?;

    // Counts of zero contribute nothing to E[y y'], so the sum starts at 1.
    let mut ey12 = 0.0;
    for j in 1..=jmax1 {
        let zlo1 = (thresholds.lower(j) - m1) / s1;
        let zhi1 = (thresholds.upper(j) - m1) / s1;
        for k in 1..=jmax2 {
            let zlo2 = (thresholds.lower(k) - m2) / s2;
            let zhi2 = (thresholds.upper(k) - m2) / s2;
            let p = bvn_rect_prob(rho, zlo1, zhi1, zlo2, zhi2);
            ey12 += (j as f64) * (k as f64) * p;
        }
    }
    let mean1 = induced_mean(&marg1, tail_prob, thresholds)?;
    let mean2 = induced_mean(&marg2, tail_prob, thresholds)?;
    Ok(ey12 - mean1 * mean2)
}

/// Probability that a standard bivariate normal pair with correlation `rho`
/// falls in the rectangle `[zlo1, zhi1) x [zlo2, zhi2)` (standardized
/// coordinates).
///
/// The inner coordinate is integrated exactly through the conditional normal
/// cdf; the outer coordinate uses adaptive Gauss-Legendre panels refined to a
/// relative tolerance of 1e-8.
fn bvn_rect_prob(rho: f64, zlo1: f64, zhi1: f64, zlo2: f64, zhi2: f64) -> f64 {
    const REL_TOL: f64 = 1e-8;
    // Outer integration range, clipped where the standard normal carries
    // essentially no mass.
    let a = zlo1.max(-9.0);
    let b = zhi1.min(9.0);
    if a >= b {
        return 0.0;
    }
    let w = (1.0 - rho * rho).sqrt();
    let integrand = |z: f64| -> f64 {
        let hi = (zhi2 - rho * z) / w;
        let lo = (zlo2 - rho * z) / w;
        let slab = if lo > 0.0 {
            normal::sf(lo) - normal::sf(hi)
        } else {
            normal::cdf(hi) - normal::cdf(lo)
        };
        normal::pdf(z) * slab.max(0.0)
    };

    // First coarse pass over a few fixed panels fixes the absolute tolerance.
    let coarse: f64 = {
        let n = 8;
        let step = (b - a) / n as f64;
        (0..n)
            .map(|i| gl15(&integrand, a + i as f64 * step, a + (i + 1) as f64 * step))
            .sum()
    };
    let tol = (REL_TOL * coarse.abs()).max(1e-16);

    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let whole = gl7(&integrand, lo, hi);
        let refined = gl15(&integrand, lo, hi);
        if (whole - refined).abs() <= tol || depth >= 52 {
            total += refined;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, tol / 2.0, depth + 1));
            stack.push((mid, hi, tol / 2.0, depth + 1));
        }
    }
    total.clamp(0.0, 1.0)
}

/// 7-point Gauss-Legendre rule on `[lo, hi]`.
fn gl7(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const X: [f64; 4] = [
        0.0,
        0.405_845_151_377_397_2,
        0.741_531_185_599_394_5,
        0.949_107_912_342_758_5,
    ];
    const W: [f64; 4] = [
        0.417_959_183_673_469_4,
        0.381_830_050_505_118_9,
        0.279_705_391_489_276_7,
        0.129_484_966_168_869_7,
    ];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = W[0] * f(c);
    for i in 1..4 {
        acc += W[i] * (f(c - h * X[i]) + f(c + h * X[i]));
    }
    acc * h
}

/// 15-point Gauss-Legendre rule on `[lo, hi]`.
fn gl15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const X: [f64; 8] = [
        0.0,
        0.201_194_093_997_434_5,
        0.394_151_347_077_563_4,
        0.570_972_172_608_538_8,
        0.724_417_731_360_170_1,
        0.848_206_583_410_427_2,
        0.937_273_392_400_706_0,
        0.987_992_518_020_485_4,
    ];
    const W: [f64; 8] = [
        0.202_578_241_925_561_3,
        0.198_431_485_327_111_6,
        0.186_161_000_015_562_2,
        0.166_269_205_816_993_9,
        0.139_570_677_926_154_3,
        0.107_159_220_467_171_9,
        0.070_366_047_488_108_1,
        0.030_753_241_996_117_3,
    ];
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = W[0] * f(c);
    for i in 1..8 {
        acc += W[i] * (f(c - h * X[i]) + f(c + h * X[i]));
    }
    acc * h
}
