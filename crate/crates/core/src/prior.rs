//! Priors over the unidentified direction and the bias distributions they
//! induce.
//!
//! With the direction uniform on the unit sphere, the confounding bias of a
//! contrast is the worst-case half-width `b` times the inner product of a
//! uniform unit vector with a fixed unit vector. That inner product rescales
//! to a symmetric Beta law: `bias = 2b (Z - 1/2)` with
//! `Z ~ Beta((m-1)/2, (m-1)/2)`, so for many confounders the bias
//! concentrates near zero even though the worst case does not shrink.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::beta::beta_reg;

use crate::bounds::{r2_min, worst_case_interval, NcGeometry};
use crate::error::{Error, Result};
use crate::model::{
    bias_of, gamma_from_spec, mu_delta, ConfounderPosterior, Contrast, SensitivitySpec,
};
use crate::rng::RngStream;

/// One uniform draw from the unit sphere in `R^m`.
pub(crate) fn sphere_direction<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm > 1e-12 {
            return z / norm;
        }
    }
}

/// `n` uniform draws from the unit sphere in `R^m`, one per row.
///
/// For `m = 1` the sphere is the pair `{-1, +1}`.
pub fn sample_sphere(m: usize, n: usize, stream: RngStream) -> Result<DMatrix<f64>> {
    if m < 1 {
        return Err(Error::InvalidParam(
            "sphere dimension must be at least 1".to_string(),
        ));
    }
    let mut rng = stream.rng();
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        out.set_row(i, &sphere_direction(m, &mut rng).transpose());
    }
    Ok(out)
}

/// Monte Carlo draws of the confounding bias of one contrast under the
/// uniform direction prior at a fixed confounding fraction.
#[derive(Debug, Clone)]
pub struct BiasSample {
    pub draws: Vec<f64>,
    pub m: usize,
    pub r2: f64,
    pub seed: u64,
    pub contrast_id: Option<String>,
}

/// Sample the bias prior: draw directions uniformly, map each through the
/// sensitivity parameterization, and take the inner product with the
/// confounder mean difference. Every draw is bounded by the worst-case
/// half-width in absolute value.
pub fn bias_prior_draws(
    cp: &ConfounderPosterior,
    contrast: &Contrast,
    sigma2_y_t: f64,
    r2: f64,
    n: usize,
    stream: RngStream,
) -> Result<BiasSample> {
    let mu = mu_delta(cp, contrast)?;
    let m = cp.n_confounders();
    let mut rng = stream.rng();
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let d = sphere_direction(m, &mut rng);
        let spec = SensitivitySpec::new(r2, d)?;
        let gamma = gamma_from_spec(&spec, sigma2_y_t, cp)?;
        draws.push(bias_of(&gamma, &mu)?);
    }
    Ok(BiasSample {
        draws,
        m,
        r2,
        seed: stream.seed(),
        contrast_id: None,
    })
}

/// CDF at `x` of the bias induced by a uniform direction prior, where `b` is
/// the worst-case half-width and `m >= 2` is the confounder count: the law of
/// `2b (Z - 1/2)` with `Z ~ Beta((m-1)/2, (m-1)/2)`, evaluated through the
/// regularized incomplete beta function. Arguments outside `[-b, b]` clamp to
/// 0 or 1.
pub fn beta_bias_cdf(x: f64, m: usize, b: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidParam(format!(
            "beta bias law needs at least 2 confounders, got {m}"
        )));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "half-width must be positive, got {b}"
        )));
    }
    if x <= -b {
        return Ok(0.0);
    }
    if x >= b {
        return Ok(1.0);
    }
    let a = (m as f64 - 1.0) / 2.0;
    let z = (x + b) / (2.0 * b);
    Ok(beta_reg(a, a, z))
}

/// Draw `gamma` vectors satisfying the negative-control constraint exactly,
/// with the unconstrained component uniform on the sphere of the complement
/// subspace.
///
/// Each returned row satisfies `gamma' cov^{1/2} M = tau_check` and
/// `gamma' cov gamma = r2 * sigma2_y_t`. At `r2 = r2_min` the free component
/// has zero norm and every draw equals the unique minimal-confounding
/// solution.
pub fn sample_gamma_nc(
    geo: &NcGeometry,
    cp: &ConfounderPosterior,
    tau_check: &DVector<f64>,
    sigma2_y_t: f64,
    r2: f64,
    n: usize,
    stream: RngStream,
) -> Result<DMatrix<f64>> {
    let mut rng = stream.rng();
    gamma_nc_core(geo, cp, tau_check, sigma2_y_t, r2, n, &mut rng)
}

pub(crate) fn gamma_nc_core<R: Rng + ?Sized>(
    geo: &NcGeometry,
    cp: &ConfounderPosterior,
    tau_check: &DVector<f64>,
    sigma2_y_t: f64,
    r2: f64,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::InvalidParam(format!(
            "r2 must be in [0,1], got {r2}"
        )));
    }
    let m = cp.n_confounders();
    if geo.n_confounders() != m {
        return Err(Error::DimensionMismatch(
            "geometry and posterior disagree on confounder count".to_string(),
        ));
    }
    // compatibility precondition: the projected system must reproduce tau
    let x = geo.min_norm_solution(tau_check);
    let residual = (geo.m().transpose() * &x - tau_check).norm();
    if residual > 1e-8 * (1.0 + tau_check.norm()) {
        return Err(Error::Incompatible {
            residual_norm: residual,
        });
    }
    let r2_min_val = r2_min(geo, tau_check, sigma2_y_t)?;
    let free_sq = r2 * sigma2_y_t - x.norm_squared();
    if free_sq < -1e-10 * sigma2_y_t {
        return Err(Error::Infeasible { r2_min: r2_min_val });
    }
    let complement_rank = m - geo.rank();
    if complement_rank == 0 && free_sq > 1e-9 * sigma2_y_t {
        // the constraint pins gamma completely; only r2 = r2_min is feasible
        return Err(Error::Infeasible { r2_min: r2_min_val });
    }
    let free_norm = if complement_rank == 0 {
        0.0
    } else {
        free_sq.max(0.0).sqrt()
    };

    let inv_sqrt = cp.cov_inv_sqrt();
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        let free = if complement_rank == 0 || free_norm == 0.0 {
            DVector::zeros(m)
        } else {
            // project a sphere draw into the complement and rescale
            loop {
                let w = geo.p_perp() * sphere_direction(m, rng);
                let norm = w.norm();
                if norm > 1e-12 {
                    break w * (free_norm / norm);
                }
            }
        };
        let gamma = inv_sqrt * (&x + free);
        out.set_row(i, &gamma.transpose());
    }
    Ok(out)
}

/// Worst-case half-width helper shared by tests and the CLI: the bound that
/// `bias_prior_draws` never exceeds.
pub fn worst_case_half_width(
    cp: &ConfounderPosterior,
    contrast: &Contrast,
    sigma2_y_t: f64,
    r2: f64,
) -> Result<f64> {
    Ok(worst_case_interval(cp, contrast, sigma2_y_t, r2, 0.0)?.half_width)
}
