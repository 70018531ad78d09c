//! Partial-identification bounds and prior-sensitivity diagnostics for
//! multi-treatment causal inference with unobserved confounding.
//!
//! The model: several treatments load on a low-dimensional Gaussian
//! confounder through a factor model, and a scalar outcome is linear in
//! treatments and confounders. Treatment effects are then only partially
//! identified: the data pin the factor model and the naive regression, while
//! the confounder-to-outcome coefficients are free inside an ellipsoid.
//! This crate computes what can and cannot be learned in that setting:
//!
//! - [`model`]: the generative model, the conditional confounder law, and
//!   the decomposition of naive effects into causal effect plus bias.
//! - [`factor`]: fitting the factor model from treatment data (closed-form
//!   maximum likelihood) and scree diagnostics for the rank choice.
//! - [`bounds`]: worst-case bias intervals, negative-control compatibility,
//!   the implied minimum confounding fraction, and constrained intervals.
//! - [`prior`]: uniform direction priors, the scaled Beta law of the induced
//!   bias, and exact sampling on the negative-control feasible set.
//! - [`mcmc`]: posterior samplers under flat, uniform-fraction,
//!   negative-control, and shrinkage priors.
//! - [`sim`]: synthetic benchmark generators with known ground truth.
//!
//! # Example
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use partialid::model::{confounder_posterior, Contrast, FactorModel};
//! use partialid::bounds::worst_case_interval;
//!
//! // one confounder driving two treatments
//! let fm = FactorModel::new(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), 1.0)?;
//! let cp = confounder_posterior(&fm)?;
//! let contrast = Contrast::new(
//!     DVector::from_vec(vec![1.0, 0.0]),
//!     DVector::from_vec(vec![0.0, 0.0]),
//! )?;
//! // if confounding explains up to 30% of residual outcome variance,
//! // how far can a naive effect of 0.8 be off?
//! let interval = worst_case_interval(&cp, &contrast, 2.0, 0.3, 0.8)?;
//! let (lo, hi) = interval.pate();
//! assert!(lo < 0.8 && 0.8 < hi);
//! # Ok::<(), partialid::Error>(())
//! ```

pub mod bounds;
pub mod error;
pub mod factor;
mod linalg;
pub mod mcmc;
pub mod model;
pub mod prior;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngStream;
