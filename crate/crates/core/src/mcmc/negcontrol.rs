//! Sampler under point-mass-at-zero priors on designated treatment effects.
//!
//! The identified block is drawn exactly as in the transparent sampler. Each
//! draw's observed control effects (the naive coefficients at the control
//! indices, encoded as unit coordinate contrasts) then pin part of the
//! confounder block: the fraction is drawn uniformly above the draw's
//! implied minimum and the coefficient vector is completed uniformly on the
//! feasible sphere of the complement subspace. The controls' causal effects
//! are exactly zero in every draw.

use nalgebra::{Cholesky, DVector};
use rand::Rng;

use crate::bounds::{nc_compatible, nc_geometry, project_tau_check, r2_min, ContrastSet};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mcmc::{
    check_iterations, draw_inv_gamma, draw_mvn_chol, Dataset, DrawAccumulator, PosteriorDraws,
    PriorKind, PriorRegime, SamplerContext,
};
use crate::model::{Contrast, FactorModel};
use crate::prior::gamma_nc_core;
use crate::rng::RngStream;

const COMPAT_TOL: f64 = 1e-8;

/// Exact posterior sampling with designated treatment effects fixed at zero.
///
/// When the observed control effects are not exactly in the row space of the
/// constraint matrix (which is typical for estimated data with more controls
/// than confounders), sampling proceeds with their row-space projection and
/// the result is flagged with the residual at the least-squares fit.
pub fn sample_negative_control(
    ds: &Dataset,
    fm: &FactorModel,
    regime: &PriorRegime,
    n_iter: usize,
    n_warmup: usize,
    stream: RngStream,
) -> Result<PosteriorDraws> {
    if regime.kind != PriorKind::NegativeControl {
        return Err(Error::InvalidParam(
            "sample_negative_control requires the point-mass regime".to_string(),
        ));
    }
    regime.validate(ds.k())?;
    check_iterations(n_iter, n_warmup)?;
    let nc_indices = regime.nc_indices.clone().expect("validated above");
    let ctx = SamplerContext::new(ds, fm)?;
    let (k, m) = (ctx.k(), ctx.m());
    if ctx.n() <= k {
        return Err(Error::Degenerate(format!(
            "need n > k, got n={} k={k}",
            ctx.n()
        )));
    }

    // geometry of the unit coordinate-contrast controls
    let contrasts: Result<Vec<Contrast>> = nc_indices
        .iter()
        .map(|&i| Contrast::coordinate(i, 1.0, k))
        .collect();
    let cs = ContrastSet::new(contrasts?, vec![true; nc_indices.len()])?;
    let geo = nc_geometry(&ctx.cp, &cs)?;

    // compatibility at the least-squares fit (the posterior mean of the
    // identified block under flat priors)
    let tau_mean = DVector::from_fn(nc_indices.len(), |j, _| ctx.ols.coef[nc_indices[j]]);
    let (compatible, residual) = nc_compatible(&geo, &tau_mean, COMPAT_TOL);
    let nc_projected = !compatible;
    let nc_residual_norm = (!compatible).then_some(residual);

    // fail early if even the minimal confounding is outside the prior range
    let tau_mean_proj = project_tau_check(&geo, &tau_mean);
    let sigma2_hat = ctx.ols.resid_var();
    let r2_floor = r2_min(&geo, &tau_mean_proj, sigma2_hat)?;
    if r2_floor > 1.0 {
        return Err(Error::Infeasible { r2_min: r2_floor });
    }
    if r2_floor > regime.r2_upper {
        return Err(Error::Infeasible { r2_min: r2_floor });
    }

    let chol_xtx_inv = Cholesky::new(linalg::symmetrize(&ctx.ols.xtx_inv))
        .ok_or_else(|| Error::Degenerate("gram inverse not positive definite".to_string()))?;
    // controls spanning the whole confounder space pin gamma completely,
    // leaving r2 at the floor with no free direction
    let pinned = geo.rank() == m;

    let mut rng = stream.rng();
    let mut rejected: u64 = 0;
    let mut acc = DrawAccumulator::new(k, m, n_iter - n_warmup);
    for it in 0..n_iter {
        // identified-block draws whose implied floor exceeds 1 contradict
        // the feasibility ellipsoid outright; reject and redraw
        let (sigma2, beta_check, tau_proj, floor) = loop {
            let sigma2 = draw_inv_gamma(ctx.ols.df as f64 / 2.0, ctx.ols.rss / 2.0, &mut rng);
            let beta_check = draw_mvn_chol(&ctx.ols.coef, &chol_xtx_inv, sigma2, &mut rng);
            let tau = DVector::from_fn(nc_indices.len(), |j, _| beta_check[nc_indices[j]]);
            let tau_proj = project_tau_check(&geo, &tau);
            let floor = r2_min(&geo, &tau_proj, sigma2)?;
            if floor <= 1.0 {
                break (sigma2, beta_check, tau_proj, floor);
            }
            rejected += 1;
            if rejected > 10_000 {
                return Err(Error::Infeasible { r2_min: floor });
            }
        };
        let r2 = if pinned || regime.r2_upper <= floor {
            floor
        } else {
            rng.random_range(floor..regime.r2_upper)
        };
        let gamma_rows = gamma_nc_core(&geo, &ctx.cp, &tau_proj, sigma2, r2, 1, &mut rng)?;
        let gamma = gamma_rows.row(0).transpose();
        if it < n_warmup {
            continue;
        }
        let mut beta = &beta_check - ctx.cp.mean_map().transpose() * &gamma;
        for &j in &nc_indices {
            beta[j] = 0.0;
        }
        let quad = (ctx.cp.cov() * &gamma).dot(&gamma);
        acc.push(it as u32, &beta, &gamma, &beta_check, quad / sigma2, sigma2);
    }
    let mut draws = acc.finish(ds, rejected);
    draws.nc_projected = nc_projected;
    draws.nc_residual_norm = nc_residual_norm;
    Ok(draws)
}
