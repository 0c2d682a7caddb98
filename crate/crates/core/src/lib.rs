//! Rounded stochastic-process models for count data.
//!
//! Count measurements taken along a continuous index (time, distance, dose)
//! are modeled here by a latent continuous process pushed through a fixed
//! rounding operator: a latent path `y*` is drawn from a Gaussian process or
//! a penalized-spline regression, and the observed count at location `s` is
//! `y(s) = h(y*(s))`, where `h` maps the real line onto the non-negative
//! integers via a threshold sequence. Inference is by Markov chain Monte
//! Carlo: the latent path is imputed from its truncated normal conditional
//! (each observed count confines the latent value to an interval), and the
//! process hyperparameters are updated by conjugate or Metropolis-Hastings
//! steps.
//!
//! Modules:
//!
//! - [`rounding`]: the threshold operator, induced count moments, and the
//!   series containers shared by every model.
//! - [`samplers`]: seeded RNG streams and the primitive draws (truncated
//!   normal, rectangle-restricted multivariate normal, gamma, MH step).
//! - [`gp`]: the rounded Gaussian-process model with squared-exponential
//!   kernel and its predictive machinery.
//! - [`spline`]: the rounded penalized B-spline model.
//! - [`predict`]: posterior predictive paths and their count-scale
//!   summaries (pointwise medians and quantile bands).
//! - [`hier`]: hierarchical extensions for repeated series per subject --
//!   Dirichlet-process random effects, per-group spline curves, and an
//!   additive model with AR(1) within-subject errors.
//! - [`simbench`]: simulation scenarios and the benchmark harness comparing
//!   rounded fits against two-stage and interpolation baselines.
//! - [`diagnostics`]: small statistical helpers used by the test batteries.
//!
//! # Example
//!
//! ```
//! use countproc_core::predict::posterior_median_series;
//! use countproc_core::rounding::{CountSeries, ThresholdSequence, round_value};
//! use countproc_core::spline::{RpsplineConfig, rpspline_fit, rpspline_predict};
//!
//! let ts = ThresholdSequence::standard();
//! assert_eq!(round_value(2.4, &ts).unwrap(), 3); // latent in [2,3) reads as count 3
//!
//! let s: Vec<f64> = (0..40).map(|i| i as f64 / 2.0).collect();
//! let y: Vec<u64> = s.iter().map(|&si| (si / 5.0).floor() as u64).collect();
//! let data = CountSeries::new(s.clone(), y).unwrap();
//! let cfg = RpsplineConfig { n_iter: 200, burn_in: 50, seed: 7, ..RpsplineConfig::default() };
//! let draws = rpspline_fit(&data, &cfg).unwrap();
//! let preds = rpspline_predict(&draws, &s, 11).unwrap();
//! let estimate = posterior_median_series(&preds).unwrap();
//! assert_eq!(estimate.len(), 40);
//! ```

pub mod diagnostics;
pub mod error;
pub mod gp;
pub mod hier;
pub mod normal;
pub mod predict;
pub mod rounding;
pub mod samplers;
pub mod simbench;
pub mod spline;

pub use error::{Error, Result};
pub use predict::PredictiveDraws;
pub use rounding::{CountSeries, LatentSeries, ThresholdSequence};
pub use samplers::RngStream;
