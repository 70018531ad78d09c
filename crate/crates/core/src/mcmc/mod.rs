//! Posterior samplers for the linear outcome model under several prior
//! regimes, all producing draws over the causal coefficients, the confounder
//! coefficients, the residual variance, and the confounding fraction.
//!
//! The observed-data likelihood depends only on the naive coefficients and
//! the residual variance; what the regimes differ on is how the unidentified
//! part is tied down. Every retained draw satisfies the feasibility
//! constraint `gamma' cov gamma <= sigma2_y_t`.

mod diagnostics;
mod flat_gamma;
mod horseshoe;
mod negcontrol;
mod transparent;

pub use diagnostics::{series_rhat, summarize, ParamSummary};
pub use flat_gamma::sample_flat_gamma;
pub use horseshoe::sample_horseshoe;
pub use negcontrol::sample_negative_control;
pub use transparent::sample_transparent;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor::TreatmentMatrix;
use crate::linalg;
use crate::model::{confounder_posterior, ConfounderPosterior, FactorModel};
use crate::rng::RngStream;

/// Observed treatments paired with the outcome vector.
#[derive(Debug, Clone)]
pub struct Dataset {
    treatments: TreatmentMatrix,
    outcome: DVector<f64>,
}

impl Dataset {
    pub fn new(treatments: TreatmentMatrix, outcome: DVector<f64>) -> Result<Self> {
        if treatments.n_rows() != outcome.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} treatment rows but {} outcomes",
                treatments.n_rows(),
                outcome.len()
            )));
        }
        if !linalg::all_finite_vec(&outcome) {
            return Err(Error::NonFinite("outcome".to_string()));
        }
        Ok(Self {
            treatments,
            outcome,
        })
    }

    pub fn treatments(&self) -> &TreatmentMatrix {
        &self.treatments
    }

    pub fn outcome(&self) -> &DVector<f64> {
        &self.outcome
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn k(&self) -> usize {
        self.treatments.n_cols()
    }
}

/// Which prior regime a sampler runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    /// Improper flat prior directly on the causal and confounder coefficients.
    FlatGamma,
    /// Uniform prior on the confounding fraction with a uniform direction.
    R2Uniform,
    /// Point-mass-at-zero priors on designated treatment effects.
    NegativeControl,
    /// Global-local shrinkage on all treatment effects.
    Horseshoe,
    /// Shrinkage only on the designated (relaxed negative control) effects.
    HorseshoeNc,
}

/// Prior configuration shared across the samplers.
#[derive(Debug, Clone)]
pub struct PriorRegime {
    pub kind: PriorKind,
    /// Upper bound of the uniform prior on the confounding fraction, in
    /// `[0, 1]`. Zero means conditioning on no confounding exactly.
    pub r2_upper: f64,
    /// Treatment indices constrained (or shrunk) to zero.
    pub nc_indices: Option<Vec<usize>>,
    /// Global scale of the shrinkage prior; derived from an expected 10%
    /// non-null fraction when absent.
    pub horseshoe_scale: Option<f64>,
    /// Slab scale bounding how far large effects escape shrinkage.
    pub horseshoe_slab: f64,
    /// Diagnostic mode: freeze every local scale at 1 and the global scale
    /// at this value instead of sampling them, turning the shrinkage prior
    /// into a fixed Gaussian. Large values recover near-flat behavior.
    pub fixed_scales: Option<f64>,
}

impl PriorRegime {
    pub fn r2_uniform(r2_upper: f64) -> Self {
        Self {
            kind: PriorKind::R2Uniform,
            r2_upper,
            nc_indices: None,
            horseshoe_scale: None,
            horseshoe_slab: 2.0,
            fixed_scales: None,
        }
    }

    pub fn flat_gamma() -> Self {
        Self {
            kind: PriorKind::FlatGamma,
            r2_upper: 1.0,
            nc_indices: None,
            horseshoe_scale: None,
            horseshoe_slab: 2.0,
            fixed_scales: None,
        }
    }

    pub fn negative_control(nc_indices: Vec<usize>, r2_upper: f64) -> Self {
        Self {
            kind: PriorKind::NegativeControl,
            r2_upper,
            nc_indices: Some(nc_indices),
            horseshoe_scale: None,
            horseshoe_slab: 2.0,
            fixed_scales: None,
        }
    }

    pub fn horseshoe(r2_upper: f64) -> Self {
        Self {
            kind: PriorKind::Horseshoe,
            r2_upper,
            nc_indices: None,
            horseshoe_scale: None,
            horseshoe_slab: 2.0,
            fixed_scales: None,
        }
    }

    pub fn horseshoe_nc(nc_indices: Vec<usize>, r2_upper: f64) -> Self {
        Self {
            kind: PriorKind::HorseshoeNc,
            r2_upper,
            nc_indices: Some(nc_indices),
            horseshoe_scale: None,
            horseshoe_slab: 2.0,
            fixed_scales: None,
        }
    }

    pub(crate) fn validate(&self, k: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r2_upper) {
            return Err(Error::InvalidParam(format!(
                "r2_upper must be in [0,1], got {}",
                self.r2_upper
            )));
        }
        if matches!(
            self.kind,
            PriorKind::NegativeControl | PriorKind::HorseshoeNc
        ) {
            let idx = self
                .nc_indices
                .as_ref()
                .filter(|v| !v.is_empty())
                .ok_or_else(|| {
                    Error::InvalidParam(
                        "this regime requires a non-empty set of control indices".to_string(),
                    )
                })?;
            if let Some(bad) = idx.iter().find(|&&i| i >= k) {
                return Err(Error::DimensionMismatch(format!(
                    "control index {bad} out of range for k={k}"
                )));
            }
        }
        if self.horseshoe_slab <= 0.0 || self.horseshoe_slab.is_nan() {
            return Err(Error::InvalidParam(
                "slab scale must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Retained posterior draws, one row per kept iteration across chains.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub beta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    /// Naive coefficients implied by each draw.
    pub beta_check: DMatrix<f64>,
    /// Confounding fraction implied by each draw's `gamma`.
    pub r2: Vec<f64>,
    pub sigma2_y_t: Vec<f64>,
    pub chain_id: Vec<u32>,
    pub iteration: Vec<u32>,
    /// Per-draw per-observation log density under the observed model.
    pub pointwise_loglik: DMatrix<f64>,
    /// Non-finite conditional updates that were redrawn.
    pub rejected_updates: u64,
    /// Row-space projection residual of the control effects at the posterior
    /// mean, when the control constraint could not be met exactly.
    pub nc_residual_norm: Option<f64>,
    /// Whether sampling proceeded with projected control effects.
    pub nc_projected: bool,
}

impl PosteriorDraws {
    pub fn n_draws(&self) -> usize {
        self.r2.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.beta.ncols()
    }

    pub fn n_confounders(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn beta_column(&self, j: usize) -> Vec<f64> {
        self.beta.column(j).iter().cloned().collect()
    }

    pub fn beta_check_column(&self, j: usize) -> Vec<f64> {
        self.beta_check.column(j).iter().cloned().collect()
    }

    pub fn gamma_column(&self, j: usize) -> Vec<f64> {
        self.gamma.column(j).iter().cloned().collect()
    }

    /// Group a per-draw series by chain, in chain order.
    pub fn by_chain(&self, values: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(values.len(), self.n_draws());
        let mut chains: Vec<u32> = self.chain_id.clone();
        chains.dedup();
        chains
            .iter()
            .map(|c| {
                values
                    .iter()
                    .zip(&self.chain_id)
                    .filter_map(|(v, id)| (id == c).then_some(*v))
                    .collect()
            })
            .collect()
    }

    /// Concatenate draws from independent chains.
    pub fn merge(parts: Vec<PosteriorDraws>) -> PosteriorDraws {
        assert!(!parts.is_empty());
        let k = parts[0].n_treatments();
        let m = parts[0].n_confounders();
        let n_obs = parts[0].pointwise_loglik.ncols();
        let total: usize = parts.iter().map(|p| p.n_draws()).sum();
        let mut out = PosteriorDraws {
            beta: DMatrix::zeros(total, k),
            gamma: DMatrix::zeros(total, m),
            beta_check: DMatrix::zeros(total, k),
            r2: Vec::with_capacity(total),
            sigma2_y_t: Vec::with_capacity(total),
            chain_id: Vec::with_capacity(total),
            iteration: Vec::with_capacity(total),
            pointwise_loglik: DMatrix::zeros(total, n_obs),
            rejected_updates: 0,
            nc_residual_norm: None,
            nc_projected: false,
        };
        let mut row = 0usize;
        for part in parts {
            for i in 0..part.n_draws() {
                out.beta.set_row(row, &part.beta.row(i));
                out.gamma.set_row(row, &part.gamma.row(i));
                out.beta_check.set_row(row, &part.beta_check.row(i));
                out.pointwise_loglik
                    .set_row(row, &part.pointwise_loglik.row(i));
                row += 1;
            }
            out.r2.extend_from_slice(&part.r2);
            out.sigma2_y_t.extend_from_slice(&part.sigma2_y_t);
            out.chain_id.extend_from_slice(&part.chain_id);
            out.iteration.extend_from_slice(&part.iteration);
            out.rejected_updates += part.rejected_updates;
            out.nc_projected |= part.nc_projected;
            if part.nc_residual_norm.is_some() {
                out.nc_residual_norm = part.nc_residual_norm;
            }
        }
        out
    }
}

/// Per-draw per-observation Gaussian log density of the outcome under the
/// observed model implied by each draw.
pub fn pointwise_loglik(draws: &PosteriorDraws, ds: &Dataset) -> DMatrix<f64> {
    let x = ds.treatments().data();
    let y = ds.outcome();
    let n = ds.n();
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut out = DMatrix::zeros(draws.n_draws(), n);
    for i in 0..draws.n_draws() {
        let beta_check = draws.beta_check.row(i).transpose();
        let sigma2 = draws.sigma2_y_t[i];
        let mean = x * beta_check;
        for j in 0..n {
            let resid = y[j] - mean[j];
            out[(i, j)] = -half_log_2pi - 0.5 * sigma2.ln() - resid * resid / (2.0 * sigma2);
        }
    }
    out
}

/// Run `n_chains` independent chains of the regime's sampler in parallel and
/// merge the results. Chain `c` uses substream `c` of `stream`.
pub fn run_chains(
    ds: &Dataset,
    fm: &FactorModel,
    regime: &PriorRegime,
    n_iter: usize,
    n_warmup: usize,
    n_chains: usize,
    stream: RngStream,
) -> Result<PosteriorDraws> {
    if n_chains == 0 {
        return Err(Error::InvalidParam("need at least one chain".to_string()));
    }
    let parts: Result<Vec<PosteriorDraws>> = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let sub = stream.substream(c as u64);
            let mut draws = match regime.kind {
                PriorKind::R2Uniform => sample_transparent(ds, fm, regime, n_iter, n_warmup, sub),
                PriorKind::FlatGamma => sample_flat_gamma(ds, fm, n_iter, n_warmup, sub),
                PriorKind::NegativeControl => {
                    sample_negative_control(ds, fm, regime, n_iter, n_warmup, sub)
                }
                PriorKind::Horseshoe | PriorKind::HorseshoeNc => {
                    sample_horseshoe(ds, fm, regime, n_iter, n_warmup, sub)
                }
            }?;
            for id in draws.chain_id.iter_mut() {
                *id = c as u32;
            }
            Ok(draws)
        })
        .collect();
    Ok(PosteriorDraws::merge(parts?))
}

// ---------------------------------------------------------------------------
// shared sampler machinery
// ---------------------------------------------------------------------------

/// Least-squares fit of the outcome on the treatments: the naive effects and
/// everything needed for their conjugate posterior.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub xtx: DMatrix<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
    pub df: usize,
}

impl OlsFit {
    pub fn resid_var(&self) -> f64 {
        self.rss / self.df as f64
    }

    /// Standard errors of the coefficients.
    pub fn std_errors(&self) -> DVector<f64> {
        let s2 = self.resid_var();
        DVector::from_fn(self.coef.len(), |j, _| (s2 * self.xtx_inv[(j, j)]).sqrt())
    }
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::Degenerate(format!(
            "need more rows than columns for least squares, got {n} x {p}"
        )));
    }
    let xtx = x.transpose() * x;
    let xtx_inv = linalg::sym_inv(&xtx, "regression gram matrix")?;
    let xty = x.transpose() * y;
    let coef = &xtx_inv * &xty;
    let rss = (y - x * &coef).norm_squared();
    Ok(OlsFit {
        coef,
        xtx,
        xtx_inv,
        rss,
        df: n - p,
    })
}

/// Inverse-gamma draw with the `(shape, rate)` convention:
/// density proportional to `x^{-shape-1} exp(-rate/x)`.
pub(crate) fn draw_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(shape, 1.0).expect("valid gamma shape");
    loop {
        let g: f64 = gamma.sample(rng);
        if g > 0.0 && g.is_finite() {
            return rate / g;
        }
    }
}

/// Draw from `N(mean, scale2 * cov)` where `cov_chol` factors `cov`.
pub(crate) fn draw_mvn_chol<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov_chol: &Cholesky<f64, Dyn>,
    scale2: f64,
    rng: &mut R,
) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + cov_chol.l() * z * scale2.sqrt()
}

/// Draw from a Gaussian specified by its precision matrix:
/// `N(precision^{-1} rhs, precision^{-1})`.
pub(crate) fn draw_mvn_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    rhs: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = Cholesky::new(linalg::symmetrize(precision))
        .ok_or_else(|| Error::Degenerate("precision matrix not positive definite".to_string()))?;
    let mean = chol.solve(rhs);
    let z = DVector::from_fn(rhs.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    // solve L' w = z so that w has covariance precision^{-1}
    let w = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Degenerate("triangular solve failed".to_string()))?;
    Ok(mean + w)
}

/// Shared per-sampler context: design matrices and the confounder posterior.
pub(crate) struct SamplerContext {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub cp: ConfounderPosterior,
    /// `n x m` matrix whose rows are the conditional confounder means.
    pub w_mu: DMatrix<f64>,
    pub ols: OlsFit,
}

impl SamplerContext {
    pub fn new(ds: &Dataset, fm: &FactorModel) -> Result<Self> {
        if fm.n_treatments() != ds.k() {
            return Err(Error::DimensionMismatch(format!(
                "factor model has {} treatments, data has {}",
                fm.n_treatments(),
                ds.k()
            )));
        }
        let x = ds.treatments().data().clone();
        let y = ds.outcome().clone();
        let cp = confounder_posterior(fm)?;
        let w_mu = &x * cp.mean_map().transpose();
        let ols = ols(&x, &y)?;
        Ok(Self {
            x,
            y,
            cp,
            w_mu,
            ols,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.cp.n_confounders()
    }
}

/// Accumulates retained draws during a run.
pub(crate) struct DrawAccumulator {
    beta: Vec<f64>,
    gamma: Vec<f64>,
    beta_check: Vec<f64>,
    r2: Vec<f64>,
    sigma2: Vec<f64>,
    iteration: Vec<u32>,
    k: usize,
    m: usize,
}

impl DrawAccumulator {
    pub fn new(k: usize, m: usize, capacity: usize) -> Self {
        Self {
            beta: Vec::with_capacity(capacity * k),
            gamma: Vec::with_capacity(capacity * m),
            beta_check: Vec::with_capacity(capacity * k),
            r2: Vec::with_capacity(capacity),
            sigma2: Vec::with_capacity(capacity),
            iteration: Vec::with_capacity(capacity),
            k,
            m,
        }
    }

    pub fn push(
        &mut self,
        iteration: u32,
        beta: &DVector<f64>,
        gamma: &DVector<f64>,
        beta_check: &DVector<f64>,
        r2: f64,
        sigma2: f64,
    ) {
        self.beta.extend(beta.iter());
        self.gamma.extend(gamma.iter());
        self.beta_check.extend(beta_check.iter());
        self.r2.push(r2);
        self.sigma2.push(sigma2);
        self.iteration.push(iteration);
    }

    pub fn finish(self, ds: &Dataset, rejected_updates: u64) -> PosteriorDraws {
        let n_draws = self.r2.len();
        let beta = DMatrix::from_row_slice(n_draws, self.k, &self.beta);
        let gamma = DMatrix::from_row_slice(n_draws, self.m, &self.gamma);
        let beta_check = DMatrix::from_row_slice(n_draws, self.k, &self.beta_check);
        let mut draws = PosteriorDraws {
            beta,
            gamma,
            beta_check,
            r2: self.r2,
            sigma2_y_t: self.sigma2,
            chain_id: vec![0; n_draws],
            iteration: self.iteration,
            pointwise_loglik: DMatrix::zeros(0, 0),
            rejected_updates,
            nc_residual_norm: None,
            nc_projected: false,
        };
        draws.pointwise_loglik = pointwise_loglik(&draws, ds);
        draws
    }
}

pub(crate) fn check_iterations(n_iter: usize, n_warmup: usize) -> Result<()> {
    if n_iter == 0 || n_warmup >= n_iter {
        return Err(Error::InvalidParam(format!(
            "need n_warmup < n_iter, got warmup {n_warmup} of {n_iter}"
        )));
    }
    Ok(())
}
