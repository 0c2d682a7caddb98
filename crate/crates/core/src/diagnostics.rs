//! Small statistical helpers for the goodness-of-fit batteries.
//!
//! These are used by the crate's own distributional tests (comparing sampler
//! output against analytic laws) and by downstream acceptance checks; they
//! are deliberately minimal rather than a general statistics toolkit.

/// Kolmogorov-Smirnov statistic `sup |F_n - F|` of a sample against a
/// reference cdf. The sample does not need to be sorted.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!sample.is_empty(), "KS statistic needs a non-empty sample");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("KS sample must be NaN-free"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic Kolmogorov-Smirnov critical value at significance `alpha`
/// (supported levels: 0.01, 0.05, 0.10).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let c = if (alpha - 0.01).abs() < 1e-12 {
        1.627_62
    } else if (alpha - 0.05).abs() < 1e-12 {
        1.358_10
    } else if (alpha - 0.10).abs() < 1e-12 {
        1.222_39
    } else {
        panic!("unsupported KS significance level {alpha}")
    };
    c / (n as f64).sqrt()
}

/// Sample mean.
pub fn mean(sample: &[f64]) -> f64 {
    assert!(!sample.is_empty());
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Unbiased sample standard deviation.
pub fn sd(sample: &[f64]) -> f64 {
    let n = sample.len();
    assert!(n > 1, "sample sd needs at least two values");
    let m = mean(sample);
    (sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Standard error of the sample mean.
pub fn mean_se(sample: &[f64]) -> f64 {
    sd(sample) / (sample.len() as f64).sqrt()
}

/// Empirical quantile by the lower order statistic: the value at sorted rank
/// `ceil(q * n) - 1` (clamped). Deterministic and exact for integer data.
pub fn quantile(sample: &[f64], q: f64) -> f64 {
    assert!(!sample.is_empty());
    assert!((0.0..=1.0).contains(&q), "quantile level out of range");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("quantile sample must be NaN-free"));
    let n = xs.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    xs[rank - 1]
}
