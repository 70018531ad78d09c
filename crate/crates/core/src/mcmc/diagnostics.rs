//! Posterior summaries and convergence checks on draw matrices.

use crate::mcmc::PosteriorDraws;
use crate::stats::{mean, quantile, split_rhat};

/// Mean, central interval, and a significance flag (the 95% interval
/// excludes zero) for one scalar parameter.
#[derive(Debug, Clone)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
    pub significant: bool,
}

fn summarize_series(name: String, values: &[f64]) -> ParamSummary {
    let q025 = quantile(values, 0.025);
    let q975 = quantile(values, 0.975);
    ParamSummary {
        name,
        mean: mean(values),
        q025,
        q500: quantile(values, 0.5),
        q975,
        significant: q025 > 0.0 || q975 < 0.0,
    }
}

/// Summaries for every causal coefficient, confounder coefficient, the
/// confounding fraction, and the residual variance.
pub fn summarize(draws: &PosteriorDraws) -> Vec<ParamSummary> {
    let mut out = Vec::new();
    for j in 0..draws.n_treatments() {
        out.push(summarize_series(
            format!("beta_{}", j + 1),
            &draws.beta_column(j),
        ));
    }
    for j in 0..draws.n_confounders() {
        out.push(summarize_series(
            format!("gamma_{}", j + 1),
            &draws.gamma_column(j),
        ));
    }
    out.push(summarize_series("r2".to_string(), &draws.r2));
    out.push(summarize_series(
        "sigma2_y_t".to_string(),
        &draws.sigma2_y_t,
    ));
    out
}

/// Split-chain potential scale reduction of one per-draw series grouped by
/// the draws' chain ids.
pub fn series_rhat(draws: &PosteriorDraws, values: &[f64]) -> f64 {
    split_rhat(&draws.by_chain(values))
}
