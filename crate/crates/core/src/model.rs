//! The Gaussian treatment/confounder/outcome model and its closed-form
//! identities.
//!
//! Treatments load on a latent standard-normal confounder vector through a
//! loading matrix `B` with isotropic noise, and the outcome is linear in
//! treatments and confounders:
//!
//! ```text
//! U ~ N(0, I_m)
//! T = B U + e_t,        e_t ~ N(0, sigma2_t_u I_k)
//! Y = beta'T + gamma'U + e_y,   e_y ~ N(0, sigma2_y_tu)
//! ```
//!
//! Everything downstream (bounds, direction priors, samplers) is built from
//! the conditional law of `U` given `T`, the decomposition of the observable
//! regression into causal effect plus confounding bias, and the scaled
//! sensitivity parameterization of `gamma`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Loading matrix and treatment noise of the latent factor model.
///
/// All identified quantities derived from a `FactorModel` are invariant under
/// right-multiplication of the loadings by an orthogonal matrix; only the
/// rotation class of `B` matters.
#[derive(Debug, Clone)]
pub struct FactorModel {
    loadings: DMatrix<f64>,
    noise_var: f64,
}

impl FactorModel {
    /// `loadings` is `k x m` (treatments by confounders); `noise_var` is the
    /// shared treatment noise variance.
    pub fn new(loadings: DMatrix<f64>, noise_var: f64) -> Result<Self> {
        let (k, m) = loadings.shape();
        if k < 1 || m < 1 {
            return Err(Error::InvalidParam(format!(
                "loading matrix must be at least 1x1, got {k}x{m}"
            )));
        }
        if m > k {
            return Err(Error::InvalidParam(format!(
                "more confounders than treatments ({m} > {k})"
            )));
        }
        if !linalg::all_finite_mat(&loadings) {
            return Err(Error::NonFinite("loading matrix".to_string()));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "treatment noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self {
            loadings,
            noise_var,
        })
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Number of treatments `k`.
    pub fn n_treatments(&self) -> usize {
        self.loadings.nrows()
    }

    /// Number of confounders `m`.
    pub fn n_confounders(&self) -> usize {
        self.loadings.ncols()
    }

    /// Marginal treatment covariance `B B' + sigma2 I`.
    pub fn treatment_cov(&self) -> DMatrix<f64> {
        let k = self.n_treatments();
        &self.loadings * self.loadings.transpose() + DMatrix::identity(k, k) * self.noise_var
    }
}

/// Conditional mean map and covariance of the confounders given treatments.
///
/// The conditional distribution is `U | T=t ~ N(mean_map t, cov)` where
/// `mean_map = B'(BB' + sigma2 I)^{-1}` and `cov = I - mean_map B`. The
/// covariance does not depend on `t`, is positive definite, and has all
/// eigenvalues in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct ConfounderPosterior {
    mean_map: DMatrix<f64>,
    cov: DMatrix<f64>,
    cov_inv_sqrt: DMatrix<f64>,
}

impl ConfounderPosterior {
    /// `m x k` map from a treatment vector to the conditional confounder mean.
    pub fn mean_map(&self) -> &DMatrix<f64> {
        &self.mean_map
    }

    /// `m x m` conditional covariance.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Symmetric positive-definite inverse square root of the conditional
    /// covariance.
    pub fn cov_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.cov_inv_sqrt
    }

    pub fn n_confounders(&self) -> usize {
        self.cov.nrows()
    }

    pub fn n_treatments(&self) -> usize {
        self.mean_map.ncols()
    }

    /// Conditional confounder mean at treatment level `t`.
    pub fn mean_given(&self, t: &DVector<f64>) -> Result<DVector<f64>> {
        if t.len() != self.n_treatments() {
            return Err(Error::DimensionMismatch(format!(
                "treatment vector has length {}, expected {}",
                t.len(),
                self.n_treatments()
            )));
        }
        Ok(&self.mean_map * t)
    }

    /// `cov^{-1/2} (mean_given(t1) - mean_given(t2))`, the scaled confounder
    /// mean difference that drives every bound in this crate.
    pub fn scaled_mean_diff(&self, contrast: &Contrast) -> Result<DVector<f64>> {
        Ok(&self.cov_inv_sqrt * mu_delta(self, contrast)?)
    }
}

/// Linear outcome model in the scientific parameterization.
#[derive(Debug, Clone)]
pub struct OutcomeModel {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Residual outcome variance given treatments *and* confounders.
    pub sigma2_y_tu: f64,
}

impl OutcomeModel {
    pub fn new(beta: DVector<f64>, gamma: DVector<f64>, sigma2_y_tu: f64) -> Result<Self> {
        if !(sigma2_y_tu > 0.0 && sigma2_y_tu.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "outcome noise variance must be positive, got {sigma2_y_tu}"
            )));
        }
        if !(linalg::all_finite_vec(&beta) && linalg::all_finite_vec(&gamma)) {
            return Err(Error::NonFinite("outcome model coefficients".to_string()));
        }
        Ok(Self {
            beta,
            gamma,
            sigma2_y_tu,
        })
    }
}

/// What a regression of the outcome on treatments alone can see: the
/// no-unobserved-confounding coefficients and the residual variance given
/// treatments.
#[derive(Debug, Clone)]
pub struct ObservedOutcomeParams {
    pub beta_check: DVector<f64>,
    /// `Var(Y | T=t)`, constant in `t`.
    pub sigma2_y_t: f64,
}

/// The unidentified sensitivity pair: the fraction of residual outcome
/// variance explained by confounders, and a unit direction on the
/// `(m-1)`-sphere.
#[derive(Debug, Clone)]
pub struct SensitivitySpec {
    r2: f64,
    direction: DVector<f64>,
}

impl SensitivitySpec {
    pub fn new(r2: f64, direction: DVector<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&r2) {
            return Err(Error::InvalidParam(format!(
                "r2 must be in [0,1], got {r2}"
            )));
        }
        if !linalg::all_finite_vec(&direction) {
            return Err(Error::NonFinite("sensitivity direction".to_string()));
        }
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "direction must be a unit vector, norm is {}",
                direction.norm()
            )));
        }
        Ok(Self { r2, direction })
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }
}

/// A pair of treatment vectors whose mean-outcome difference under
/// intervention is the estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    pub t1: DVector<f64>,
    pub t2: DVector<f64>,
}

impl Contrast {
    pub fn new(t1: DVector<f64>, t2: DVector<f64>) -> Result<Self> {
        if t1.len() != t2.len() {
            return Err(Error::DimensionMismatch(format!(
                "contrast arms have lengths {} and {}",
                t1.len(),
                t2.len()
            )));
        }
        if !(linalg::all_finite_vec(&t1) && linalg::all_finite_vec(&t2)) {
            return Err(Error::NonFinite("contrast".to_string()));
        }
        Ok(Self { t1, t2 })
    }

    /// The contrast setting treatment `index` to `delta` against the all-zero
    /// baseline.
    pub fn coordinate(index: usize, delta: f64, k: usize) -> Result<Self> {
        if index >= k {
            return Err(Error::DimensionMismatch(format!(
                "treatment index {index} out of range for k={k}"
            )));
        }
        let mut t1 = DVector::zeros(k);
        t1[index] = delta;
        Ok(Self {
            t1,
            t2: DVector::zeros(k),
        })
    }

    pub fn delta(&self) -> DVector<f64> {
        &self.t1 - &self.t2
    }

    pub fn len(&self) -> usize {
        self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t1.len() == 0
    }
}

/// Conditional law of the confounders given treatments implied by a factor
/// model.
pub fn confounder_posterior(fm: &FactorModel) -> Result<ConfounderPosterior> {
    let b = fm.loadings();
    let m = fm.n_confounders();
    let marginal_inv = linalg::sym_inv(&fm.treatment_cov(), "treatment covariance")?;
    let mean_map = b.transpose() * marginal_inv;
    let cov = linalg::symmetrize(&(DMatrix::identity(m, m) - &mean_map * b));
    // eigenvalues of cov are sigma2/(s_i^2 + sigma2), so they sit in (0, 1];
    // the inv-sqrt call re-checks positive definiteness.
    let cov_inv_sqrt = linalg::sym_inv_sqrt(&cov, "conditional confounder covariance")?;
    Ok(ConfounderPosterior {
        mean_map,
        cov,
        cov_inv_sqrt,
    })
}

/// Difference in conditional confounder means between the two arms of a
/// contrast.
pub fn mu_delta(cp: &ConfounderPosterior, contrast: &Contrast) -> Result<DVector<f64>> {
    if contrast.len() != cp.n_treatments() {
        return Err(Error::DimensionMismatch(format!(
            "contrast has {} treatments, model has {}",
            contrast.len(),
            cp.n_treatments()
        )));
    }
    Ok(cp.mean_map() * contrast.delta())
}

/// Map a sensitivity specification to the confounder coefficient vector:
/// `gamma = sigma_y_t * sqrt(r2) * cov^{-1/2} d`.
///
/// The result satisfies `gamma' cov gamma = r2 * sigma2_y_t` exactly, which
/// keeps it inside the feasibility ellipsoid for any `r2 <= 1`.
pub fn gamma_from_spec(
    spec: &SensitivitySpec,
    sigma2_y_t: f64,
    cp: &ConfounderPosterior,
) -> Result<DVector<f64>> {
    if !(sigma2_y_t > 0.0 && sigma2_y_t.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "sigma2_y_t must be positive, got {sigma2_y_t}"
        )));
    }
    if spec.direction().len() != cp.n_confounders() {
        return Err(Error::DimensionMismatch(format!(
            "direction has {} entries, model has {} confounders",
            spec.direction().len(),
            cp.n_confounders()
        )));
    }
    Ok(cp.cov_inv_sqrt() * spec.direction() * (sigma2_y_t.sqrt() * spec.r2().sqrt()))
}

/// Push the scientific parameters through to what a treatment-only regression
/// identifies: `beta_check = beta + (BB'+sigma2 I)^{-1} B gamma` and
/// `sigma2_y_t = sigma2_y_tu + gamma' cov gamma`.
pub fn observed_params(om: &OutcomeModel, fm: &FactorModel) -> Result<ObservedOutcomeParams> {
    if om.beta.len() != fm.n_treatments() {
        return Err(Error::DimensionMismatch(format!(
            "beta has {} entries, model has {} treatments",
            om.beta.len(),
            fm.n_treatments()
        )));
    }
    if om.gamma.len() != fm.n_confounders() {
        return Err(Error::DimensionMismatch(format!(
            "gamma has {} entries, model has {} confounders",
            om.gamma.len(),
            fm.n_confounders()
        )));
    }
    let cp = confounder_posterior(fm)?;
    let beta_check = &om.beta + cp.mean_map().transpose() * &om.gamma;
    let sigma2_y_t = om.sigma2_y_tu + (cp.cov() * &om.gamma).dot(&om.gamma);
    Ok(ObservedOutcomeParams {
        beta_check,
        sigma2_y_t,
    })
}

/// Invert the observable decomposition: recover the causal coefficients from
/// the naive coefficients and a hypothesized `gamma`.
pub fn recover_beta(
    obs: &ObservedOutcomeParams,
    gamma: &DVector<f64>,
    cp: &ConfounderPosterior,
) -> Result<DVector<f64>> {
    if gamma.len() != cp.n_confounders() {
        return Err(Error::DimensionMismatch(format!(
            "gamma has {} entries, model has {} confounders",
            gamma.len(),
            cp.n_confounders()
        )));
    }
    Ok(&obs.beta_check - cp.mean_map().transpose() * gamma)
}

/// Confounding bias of a contrast: the inner product of `gamma` with the
/// confounder mean difference.
pub fn bias_of(gamma: &DVector<f64>, mu_d: &DVector<f64>) -> Result<f64> {
    if gamma.len() != mu_d.len() {
        return Err(Error::DimensionMismatch(format!(
            "gamma has {} entries, mean difference has {}",
            gamma.len(),
            mu_d.len()
        )));
    }
    Ok(gamma.dot(mu_d))
}
