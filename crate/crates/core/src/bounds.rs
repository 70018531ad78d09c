//! Closed-form partial-identification machinery: worst-case bias intervals,
//! negative-control constraint geometry, the implied lower bound on the
//! confounding fraction, constrained intervals, and width-reduction factors.
//!
//! For a contrast with scaled confounder mean difference
//! `v = cov^{-1/2} mu_delta`, the confounding bias is bounded by
//! `|bias| <= sigma_y * sqrt(r2) * ||v||`, attained when `gamma` aligns with
//! `cov^{-1} mu_delta`. Negative controls pin part of `gamma` through the
//! linear system `gamma' cov^{1/2} M = tau_check`, which both recenters the
//! interval and shrinks its width.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ConfounderPosterior, Contrast};

/// A collection of contrasts, some of which are flagged as negative controls
/// (assumed to have zero causal effect).
#[derive(Debug, Clone)]
pub struct ContrastSet {
    pub contrasts: Vec<Contrast>,
    pub is_negative_control: Vec<bool>,
}

impl ContrastSet {
    pub fn new(contrasts: Vec<Contrast>, is_negative_control: Vec<bool>) -> Result<Self> {
        if contrasts.is_empty() {
            return Err(Error::InvalidParam("contrast set is empty".to_string()));
        }
        if contrasts.len() != is_negative_control.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} contrasts but {} negative-control flags",
                contrasts.len(),
                is_negative_control.len()
            )));
        }
        let k = contrasts[0].len();
        if contrasts.iter().any(|c| c.len() != k) {
            return Err(Error::DimensionMismatch(
                "contrasts have inconsistent treatment dimension".to_string(),
            ));
        }
        Ok(Self {
            contrasts,
            is_negative_control,
        })
    }

    /// The flagged subset, in order.
    pub fn negative_controls(&self) -> Vec<&Contrast> {
        self.contrasts
            .iter()
            .zip(&self.is_negative_control)
            .filter_map(|(c, &nc)| nc.then_some(c))
            .collect()
    }

    pub fn n_negative_controls(&self) -> usize {
        self.is_negative_control.iter().filter(|&&b| b).count()
    }
}

/// Geometry of the negative-control constraint: the scaled mean-difference
/// matrix `M` (`m x c`), its Moore-Penrose pseudoinverse, and the projector
/// onto the orthogonal complement of its column space.
#[derive(Debug, Clone)]
pub struct NcGeometry {
    m: DMatrix<f64>,
    m_pinv: DMatrix<f64>,
    p_perp: DMatrix<f64>,
    rank: usize,
}

impl NcGeometry {
    /// `m x c` matrix of scaled confounder mean differences, one column per
    /// negative control.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `c x m` Moore-Penrose pseudoinverse of `m()`.
    pub fn m_pinv(&self) -> &DMatrix<f64> {
        &self.m_pinv
    }

    /// Symmetric idempotent projector onto the complement of `col(M)`.
    pub fn p_perp(&self) -> &DMatrix<f64> {
        &self.p_perp
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_controls(&self) -> usize {
        self.m.ncols()
    }

    pub fn n_confounders(&self) -> usize {
        self.m.nrows()
    }

    /// Minimum-norm `x` with `M'x = tau`, i.e. `pinv(M)' tau`.
    pub(crate) fn min_norm_solution(&self, tau: &DVector<f64>) -> DVector<f64> {
        self.m_pinv.transpose() * tau
    }
}

/// A symmetric-about-`center` interval of confounding bias values, carried
/// together with the naive effect it debiases. The causal-effect interval is
/// `naive_effect - [center - half_width, center + half_width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasInterval {
    pub center: f64,
    pub half_width: f64,
    pub naive_effect: f64,
}

impl BiasInterval {
    pub fn bias_lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn bias_hi(&self) -> f64 {
        self.center + self.half_width
    }

    /// Causal-effect interval `(lo, hi)` obtained by subtracting the bias
    /// interval from the naive effect.
    pub fn pate(&self) -> (f64, f64) {
        (
            self.naive_effect - self.bias_hi(),
            self.naive_effect - self.bias_lo(),
        )
    }
}

/// Worst-case bias interval at confounding fraction `r2`, with no
/// negative-control information: centered at zero with half-width
/// `sigma_y sqrt(r2) ||cov^{-1/2} mu_delta||`.
pub fn worst_case_interval(
    cp: &ConfounderPosterior,
    contrast: &Contrast,
    sigma2_y_t: f64,
    r2: f64,
    naive_effect: f64,
) -> Result<BiasInterval> {
    check_r2(r2)?;
    check_sigma2(sigma2_y_t)?;
    let v = cp.scaled_mean_diff(contrast)?;
    Ok(BiasInterval {
        center: 0.0,
        half_width: sigma2_y_t.sqrt() * r2.sqrt() * v.norm(),
        naive_effect,
    })
}

/// Assemble the negative-control geometry from the flagged contrasts of `cs`.
///
/// Zero columns (controls whose arms have equal confounder means) are allowed
/// and simply reduce the rank. With no flagged controls the geometry is
/// empty: `M` has zero columns and the complement projector is the identity.
pub fn nc_geometry(cp: &ConfounderPosterior, cs: &ContrastSet) -> Result<NcGeometry> {
    let m_dim = cp.n_confounders();
    let controls = cs.negative_controls();
    let mut m = DMatrix::zeros(m_dim, controls.len());
    for (j, contrast) in controls.iter().enumerate() {
        m.set_column(j, &cp.scaled_mean_diff(contrast)?);
    }
    let (m_pinv, rank) = linalg::pseudo_inverse(&m)?;
    let p_perp = linalg::symmetrize(&(DMatrix::identity(m_dim, m_dim) - &m * &m_pinv));
    Ok(NcGeometry {
        m,
        m_pinv,
        p_perp,
        rank,
    })
}

/// Check whether observed negative-control effects `tau_check` are consistent
/// with the constraint geometry: they must lie in the row space of `M`.
///
/// Returns `(compatible, residual_norm)` where the residual is the row-space
/// projection error and compatibility means
/// `residual <= tol * (1 + ||tau_check||)`.
pub fn nc_compatible(geo: &NcGeometry, tau_check: &DVector<f64>, tol: f64) -> (bool, f64) {
    assert_eq!(
        tau_check.len(),
        geo.n_controls(),
        "tau_check length mismatch"
    );
    let projected = geo.m().transpose() * geo.m_pinv().transpose() * tau_check;
    let residual = (tau_check - projected).norm();
    (residual <= tol * (1.0 + tau_check.norm()), residual)
}

/// Project observed control effects onto the row space of `M`, the nearest
/// compatible vector.
pub fn project_tau_check(geo: &NcGeometry, tau_check: &DVector<f64>) -> DVector<f64> {
    geo.m().transpose() * geo.m_pinv().transpose() * tau_check
}

/// Smallest confounding fraction consistent with the negative controls:
/// `||tau_check pinv(M)||^2 / sigma2_y_t`.
///
/// Values above 1 are returned as-is; they flag that no feasible `gamma`
/// reproduces the observed control effects at any confounding strength.
pub fn r2_min(geo: &NcGeometry, tau_check: &DVector<f64>, sigma2_y_t: f64) -> Result<f64> {
    check_sigma2(sigma2_y_t)?;
    if tau_check.len() != geo.n_controls() {
        return Err(Error::DimensionMismatch(format!(
            "{} control effects for {} controls",
            tau_check.len(),
            geo.n_controls()
        )));
    }
    Ok(geo.min_norm_solution(tau_check).norm_squared() / sigma2_y_t)
}

/// Bias interval for `contrast` under the negative-control constraint at
/// confounding fraction `r2`.
///
/// The interval is centered at `tau_check pinv(M) cov^{-1/2} mu_delta` with
/// half-width `sigma_y sqrt(r2 - r2_min) ||P_perp cov^{-1/2} mu_delta||`.
/// Requesting `r2` below the implied minimum is an error carrying that
/// minimum.
pub fn nc_interval(
    geo: &NcGeometry,
    cp: &ConfounderPosterior,
    contrast: &Contrast,
    tau_check: &DVector<f64>,
    sigma2_y_t: f64,
    r2: f64,
    naive_effect: f64,
) -> Result<BiasInterval> {
    check_r2(r2)?;
    let r2_min_val = r2_min(geo, tau_check, sigma2_y_t)?;
    if r2 < r2_min_val - 1e-12 {
        return Err(Error::Infeasible { r2_min: r2_min_val });
    }
    let v = cp.scaled_mean_diff(contrast)?;
    let x = geo.min_norm_solution(tau_check);
    let center = x.dot(&v);
    let half_width =
        sigma2_y_t.sqrt() * (r2 - r2_min_val).max(0.0).sqrt() * (geo.p_perp() * &v).norm();
    Ok(BiasInterval {
        center,
        half_width,
        naive_effect,
    })
}

/// Multiplicative factor by which the negative controls shrink the worst-case
/// interval for `contrast`:
/// `sqrt(1 - r2_min/r2) * ||P_perp v|| / ||v||`, always in `[0, 1]`.
pub fn width_reduction(
    geo: &NcGeometry,
    cp: &ConfounderPosterior,
    contrast: &Contrast,
    r2: f64,
    r2_min_val: f64,
) -> Result<f64> {
    if !(r2 > 0.0 && r2 <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "r2 must be in (0,1], got {r2}"
        )));
    }
    if !(0.0..=r2).contains(&r2_min_val) {
        return Err(Error::InvalidParam(format!(
            "r2_min must be in [0, r2], got {r2_min_val}"
        )));
    }
    let v = cp.scaled_mean_diff(contrast)?;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::Degenerate(
            "contrast has zero scaled confounder mean difference".to_string(),
        ));
    }
    let factor = (1.0 - r2_min_val / r2).max(0.0).sqrt() * (geo.p_perp() * &v).norm() / norm;
    Ok(factor.min(1.0))
}

fn check_r2(r2: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::InvalidParam(format!(
            "r2 must be in [0,1], got {r2}"
        )));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "sigma2_y_t must be positive, got {sigma2}"
        )));
    }
    Ok(())
}
