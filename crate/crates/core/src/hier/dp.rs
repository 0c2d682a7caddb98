//! Collapsed Pólya-urn update for normal random effects under a
//! Dirichlet-process prior with a `N(0, 1/psi)` base measure.
//!
//! Subject `i` contributes a Gaussian likelihood for its effect,
//! `xi_i ~ N(m_i, 1/q_i)` given everything else, summarised by the pseudo
//! observation mean `m_i` and precision `q_i`. One sweep reassigns every
//! subject to an existing cluster or a fresh one, then redraws each cluster
//! atom from its conjugate posterior.

use crate::error::{Error, Result};
use crate::samplers::RngStream;

/// Cluster assignments and atom values for the subject-level random effects.
#[derive(Debug, Clone)]
pub struct DpState {
    /// `assignments[i]` is the cluster index of subject `i`.
    assignments: Vec<usize>,
    /// One atom value per occupied cluster.
    atoms: Vec<f64>,
}

impl DpState {
    /// All subjects start in a single cluster with atom 0.
    pub fn new(n_subjects: usize) -> Result<Self> {
        if n_subjects == 0 {
            return Err(Error::domain("need at least one subject"));
        }
        Ok(DpState {
            assignments: vec![0; n_subjects],
            atoms: vec![0.0],
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.assignments.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.atoms.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// Effect value of subject `i` (its cluster's atom).
    pub fn effect(&self, i: usize) -> f64 {
        self.atoms[self.assignments[i]]
    }

    /// Per-subject effect values.
    pub fn effects(&self) -> Vec<f64> {
        self.assignments.iter().map(|&k| self.atoms[k]).collect()
    }

    /// Mean effect across subjects (the cluster-size-weighted atom mean).
    pub fn mean_effect(&self) -> f64 {
        let n = self.assignments.len() as f64;
        self.assignments.iter().map(|&k| self.atoms[k]).sum::<f64>() / n
    }

    /// Sum of squared atom values, one term per occupied cluster (the
    /// statistic driving the base-measure precision update).
    pub fn atom_sum_sq(&self) -> f64 {
        self.atoms.iter().map(|a| a * a).sum()
    }

    fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.atoms.len()];
        for &k in &self.assignments {
            sizes[k] += 1;
        }
        sizes
    }

    /// Remove subject `i` from its cluster, dropping the cluster if it
    /// becomes empty (atom indices above it shift down by one).
    fn remove(&mut self, i: usize, sizes: &mut Vec<usize>) {
        let k = self.assignments[i];
        sizes[k] -= 1;
        if sizes[k] == 0 {
            sizes.remove(k);
            self.atoms.remove(k);
            for a in self.assignments.iter_mut() {
                if *a > k {
                    *a -= 1;
                }
            }
            self.assignments[i] = usize::MAX; // parked until reassignment
        } else {
            self.assignments[i] = usize::MAX;
        }
    }
}

/// What one urn sweep did, for mixing diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct DpUpdateStats {
    pub n_clusters: usize,
    pub n_new_cluster_events: usize,
}

/// Below this pseudo-precision a subject's likelihood is flat in its effect,
/// and assignment probabilities reduce to the plain urn weights.
const FLAT_PRECISION: f64 = 1e-12;

fn norm_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

/// One Gibbs sweep over assignments and atoms.
///
/// `obs_mean[i]` and `obs_precision[i]` summarise subject `i`'s likelihood
/// for its effect; `alpha` is the concentration and `base_precision` the
/// base-measure precision `psi`. Precisions may be zero (flat likelihood)
/// but not negative; `alpha` and `base_precision` must be positive.
pub fn dp_gibbs_update(
    state: &mut DpState,
    obs_mean: &[f64],
    obs_precision: &[f64],
    alpha: f64,
    base_precision: f64,
    rng: &mut RngStream,
) -> Result<DpUpdateStats> {
    let n = state.n_subjects();
    if obs_mean.len() != n || obs_precision.len() != n {
        return Err(Error::domain(
            "obs_mean and obs_precision must have one entry per subject",
        ));
    }
    if !(alpha > 0.0) || !(base_precision > 0.0) {
        return Err(Error::domain(
            "alpha and base_precision must be positive",
        ));
    }
    if obs_mean.iter().any(|v| !v.is_finite())
        || obs_precision.iter().any(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(Error::domain(
            "obs_mean must be finite and obs_precision finite and non-negative",
        ));
    }

    let psi = base_precision;
    let mut sizes = state.cluster_sizes();
    let mut n_new = 0usize;
    let mut log_weights: Vec<f64> = Vec::new();

    for i in 0..n {
        state.remove(i, &mut sizes);
        let (m, q) = (obs_mean[i], obs_precision[i]);

        log_weights.clear();
        if q <= FLAT_PRECISION {
            // Flat likelihood: every placement explains the data equally well.
            for &sz in &sizes {
                log_weights.push((sz as f64).ln());
            }
            log_weights.push(alpha.ln());
        } else {
            for (k, &sz) in sizes.iter().enumerate() {
                log_weights.push((sz as f64).ln() + norm_logpdf(m, state.atoms[k], 1.0 / q));
            }
            // Fresh cluster: atom integrated out against the base measure.
            log_weights.push(alpha.ln() + norm_logpdf(m, 0.0, 1.0 / q + 1.0 / psi));
        }

        let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for w in log_weights.iter_mut() {
            *w = (*w - max).exp();
            total += *w;
        }
        let mut u = rng.uniform() * total;
        let mut pick = log_weights.len() - 1;
        for (k, w) in log_weights.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                pick = k;
                break;
            }
        }

        if pick == sizes.len() {
            // New cluster; its atom comes from the conjugate posterior under
            // the base measure (the base measure itself when q = 0).
            let prec = psi + q;
            let mean = q * m / prec;
            let atom = mean + prec.sqrt().recip() * rng.standard_normal();
            state.atoms.push(atom);
            sizes.push(1);
            state.assignments[i] = sizes.len() - 1;
            n_new += 1;
        } else {
            sizes[pick] += 1;
            state.assignments[i] = pick;
        }
    }

    // Redraw every atom from its conjugate posterior given the assignments.
    for k in 0..state.atoms.len() {
        let mut prec = psi;
        let mut wsum = 0.0;
        for i in 0..n {
            if state.assignments[i] == k {
                prec += obs_precision[i];
                wsum += obs_precision[i] * obs_mean[i];
            }
        }
        state.atoms[k] = wsum / prec + prec.sqrt().recip() * rng.standard_normal();
    }

    Ok(DpUpdateStats {
        n_clusters: state.atoms.len(),
        n_new_cluster_events: n_new,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{mean, sd};

    #[test]
    fn rejects_misaligned_or_invalid_inputs() {
        let mut rng = RngStream::new(1);
        let mut state = DpState::new(3).unwrap();
        assert!(dp_gibbs_update(&mut state, &[0.0; 2], &[1.0; 3], 1.0, 1.0, &mut rng).is_err());
        assert!(dp_gibbs_update(&mut state, &[0.0; 3], &[1.0; 3], 0.0, 1.0, &mut rng).is_err());
        assert!(dp_gibbs_update(&mut state, &[0.0; 3], &[-1.0, 1.0, 1.0], 1.0, 1.0, &mut rng).is_err());
        assert!(DpState::new(0).is_err());
    }

    // With a flat likelihood the chance that a removed subject opens a new
    // cluster is exactly alpha / (n - 1 + alpha), independent of the current
    // configuration. Check the long-run frequency of new-cluster events.
    #[test]
    fn flat_likelihood_new_cluster_rate_matches_urn() {
        let n = 8;
        let alpha = 1.0;
        let expected = alpha / (n as f64 - 1.0 + alpha);
        let mut rng = RngStream::new(42);
        let mut state = DpState::new(n).unwrap();
        let zeros = vec![0.0; n];
        let sweeps = 4000;
        let mut events = 0usize;
        for _ in 0..sweeps {
            let stats =
                dp_gibbs_update(&mut state, &zeros, &zeros, alpha, 1.0, &mut rng).unwrap();
            events += stats.n_new_cluster_events;
        }
        let trials = (sweeps * n) as f64;
        let rate = events as f64 / trials;
        // Decisions within a sweep are dependent, so allow a generous margin
        // over the iid binomial standard error.
        let se = (expected * (1.0 - expected) / trials).sqrt();
        assert!(
            (rate - expected).abs() < 6.0 * se,
            "new-cluster rate {rate} vs urn probability {expected}"
        );
    }

    // A single subject with no data always sits alone, and its atom is a
    // fresh draw from the base measure N(0, 1/psi).
    #[test]
    fn single_flat_subject_draws_atom_from_base_measure() {
        let psi = 4.0;
        let mut rng = RngStream::new(7);
        let mut state = DpState::new(1).unwrap();
        let mut draws = Vec::new();
        for _ in 0..4000 {
            dp_gibbs_update(&mut state, &[0.0], &[0.0], 1.0, psi, &mut rng).unwrap();
            assert_eq!(state.n_clusters(), 1);
            draws.push(state.atoms()[0]);
        }
        let m = mean(&draws);
        let s = sd(&draws);
        let target_sd = (1.0f64 / psi).sqrt();
        assert!(m.abs() < 4.0 * target_sd / (draws.len() as f64).sqrt() + 0.02);
        assert!((s - target_sd).abs() < 0.05, "sd {s} vs {target_sd}");
    }

    // Two well-separated bundles of subjects with tight likelihoods should
    // occupy exactly two clusters almost all the time.
    #[test]
    fn separated_subjects_form_two_clusters() {
        let obs_mean: Vec<f64> = (0..10)
            .map(|i| if i < 5 { -10.0 } else { 10.0 })
            .collect();
        let obs_prec = vec![100.0; 10];
        let mut rng = RngStream::new(3);
        let mut state = DpState::new(10).unwrap();
        for _ in 0..200 {
            dp_gibbs_update(&mut state, &obs_mean, &obs_prec, 1.0, 1.0, &mut rng).unwrap();
        }
        let mut two = 0usize;
        let total = 500;
        for _ in 0..total {
            let stats =
                dp_gibbs_update(&mut state, &obs_mean, &obs_prec, 1.0, 1.0, &mut rng).unwrap();
            if stats.n_clusters == 2 {
                two += 1;
            }
        }
        assert!(
            two as f64 >= 0.95 * total as f64,
            "two-cluster fraction {}",
            two as f64 / total as f64
        );
        // The two atoms straddle the separation.
        let effects = state.effects();
        assert!(effects[..5].iter().all(|&e| e < 0.0));
        assert!(effects[5..].iter().all(|&e| e > 0.0));
    }
}
