//! Hierarchical models for repeated count series.
//!
//! Several subjects each contribute a count trajectory. The latent value of
//! subject `i` at time `t` is a subject-level random effect plus a smooth
//! regression part plus noise, and the observed count is its rounded value.
//! Random effects get a Dirichlet-process prior with a normal base measure
//! ([`dp`]), so subjects cluster adaptively. Two likelihoods are provided:
//!
//! - [`grouped`]: one penalized-spline time trajectory per group with a
//!   smoothing weight shared across groups, iid errors;
//! - [`additive`]: a sum of four penalized-spline predictor effects with
//!   AR(1) errors along each subject's (contiguous) series.
//!
//! [`summaries`] turns fitted draws into conditional count expectations,
//! predictor effect curves, and per-group burden and onset reports.

pub mod additive;
pub mod dp;
pub mod grouped;
pub mod summaries;

pub use additive::{ar1_correlation, fit_additive_ar1, AdditiveConfig, AdditiveDraws, N_PREDICTORS};
pub use dp::{dp_gibbs_update, DpState, DpUpdateStats};
pub use grouped::{fit_grouped, GroupedConfig, GroupedDraws};
pub use summaries::{
    conditional_count_expectation, group_burden_summaries, group_contrast_draws,
    group_smooth_mean, predictor_effect_curve, EffectCurve, GroupBurdenSummary,
};

use crate::error::{Error, Result};

/// One subject's count trajectory with its group label.
#[derive(Debug, Clone)]
pub struct Subject {
    id: String,
    group: usize,
    locations: Vec<f64>,
    counts: Vec<u64>,
}

impl Subject {
    pub fn new(
        id: impl Into<String>,
        group: usize,
        locations: Vec<f64>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let id = id.into();
        if locations.is_empty() || locations.len() != counts.len() {
            return Err(Error::domain(format!(
                "subject {id}: locations and counts must be non-empty and aligned"
            )));
        }
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "subject {id}: locations must be finite"
            )));
        }
        Ok(Subject {
            id,
            group,
            locations,
            counts,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Count trajectories for several subjects, with contiguous group labels
/// `0..n_groups` (every group non-empty).
#[derive(Debug, Clone)]
pub struct FunctionalDataset {
    subjects: Vec<Subject>,
    n_groups: usize,
}

impl FunctionalDataset {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::domain("dataset needs at least one subject"));
        }
        let n_groups = subjects.iter().map(|s| s.group).max().unwrap_or(0) + 1;
        for g in 0..n_groups {
            if !subjects.iter().any(|s| s.group == g) {
                return Err(Error::domain(format!(
                    "group {g} has no subjects; labels must be contiguous from 0"
                )));
            }
        }
        Ok(FunctionalDataset { subjects, n_groups })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_obs_total(&self) -> usize {
        self.subjects.iter().map(|s| s.len()).sum()
    }

    /// Smallest and largest observation time across subjects.
    pub fn location_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.subjects {
            for &x in &s.locations {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo, hi)
    }

    /// Sorted, deduplicated observation times across subjects (the "weeks"
    /// the burden summaries report on).
    pub fn unique_locations(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .subjects
            .iter()
            .flat_map(|s| s.locations.iter().copied())
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite locations"));
        all.dedup();
        all
    }
}

/// One subject's daily count series with four per-observation covariates.
/// Times must advance in unit steps (the AR(1) error structure assumes a
/// contiguous series).
#[derive(Debug, Clone)]
pub struct AdditiveSubject {
    id: String,
    times: Vec<f64>,
    covariates: Vec<[f64; 4]>,
    counts: Vec<u64>,
}

impl AdditiveSubject {
    pub fn new(
        id: impl Into<String>,
        times: Vec<f64>,
        covariates: Vec<[f64; 4]>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let id = id.into();
        if times.is_empty() || times.len() != counts.len() || times.len() != covariates.len() {
            return Err(Error::domain(format!(
                "subject {id}: times, covariates, and counts must be non-empty and aligned"
            )));
        }
        if times.iter().any(|v| !v.is_finite())
            || covariates.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::domain(format!(
                "subject {id}: times and covariates must be finite"
            )));
        }
        for w in times.windows(2) {
            if (w[1] - w[0] - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "subject {id}: times must advance in unit steps, found {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(AdditiveSubject {
            id,
            times,
            covariates,
            counts,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn covariates(&self) -> &[[f64; 4]] {
        &self.covariates
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Daily count series with covariates for several subjects.
#[derive(Debug, Clone)]
pub struct AdditiveDataset {
    subjects: Vec<AdditiveSubject>,
}

impl AdditiveDataset {
    pub fn new(subjects: Vec<AdditiveSubject>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::domain("dataset needs at least one subject"));
        }
        Ok(AdditiveDataset { subjects })
    }

    pub fn subjects(&self) -> &[AdditiveSubject] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_obs_total(&self) -> usize {
        self.subjects.iter().map(|s| s.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        assert!(Subject::new("a", 0, vec![], vec![]).is_err());
        assert!(Subject::new("a", 0, vec![1.0], vec![2, 3]).is_err());
        assert!(Subject::new("a", 0, vec![f64::NAN], vec![2]).is_err());
        let s0 = Subject::new("a", 0, vec![1.0, 2.0], vec![0, 1]).unwrap();
        let s2 = Subject::new("b", 2, vec![1.0], vec![4]).unwrap();
        // Group 1 missing: labels are not contiguous.
        assert!(FunctionalDataset::new(vec![s0.clone(), s2]).is_err());
        assert!(FunctionalDataset::new(vec![]).is_err());
        let ds = FunctionalDataset::new(vec![s0]).unwrap();
        assert_eq!(ds.n_groups(), 1);
        assert_eq!(ds.n_obs_total(), 2);
        assert_eq!(ds.location_range(), (1.0, 2.0));
    }

    #[test]
    fn additive_subjects_require_contiguous_times() {
        let cov = vec![[0.0; 4]; 3];
        assert!(AdditiveSubject::new("a", vec![0.0, 1.0, 2.0], cov.clone(), vec![1, 2, 3]).is_ok());
        assert!(
            AdditiveSubject::new("a", vec![0.0, 1.0, 3.0], cov.clone(), vec![1, 2, 3]).is_err()
        );
        assert!(AdditiveSubject::new("a", vec![2.0, 1.0, 0.0], cov, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn unique_locations_are_sorted_and_deduplicated() {
        let s0 = Subject::new("a", 0, vec![3.0, 1.0], vec![0, 0]).unwrap();
        let s1 = Subject::new("b", 0, vec![1.0, 2.0], vec![0, 0]).unwrap();
        let ds = FunctionalDataset::new(vec![s0, s1]).unwrap();
        assert_eq!(ds.unique_locations(), vec![1.0, 2.0, 3.0]);
    }
}
