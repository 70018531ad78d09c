//! Gibbs sampler with improper flat priors directly on the causal and
//! confounder coefficients.
//!
//! The confounders are kept as latent variables: conditionally on them the
//! coefficient block is an ordinary regression on the augmented design
//! `[T U]`, and conditionally on everything else each latent row is
//! Gaussian. The residual standard deviation carries a flat prior on
//! `(0, inf)`.
//!
//! Marginally this prior concentrates the confounding fraction near its
//! feasible maximum: integrating the latent block out, the fraction given
//! the identified block has an exact `Beta(m/2, 1/2)` law, right-skewed for
//! every `m`. That is the pathology this regime exists to demonstrate. The
//! plain data-augmentation chain is sticky near the feasibility boundary,
//! so each sweep ends with an interweaving step that redraws the
//! unidentified block from that closed-form conditional while holding the
//! identified block fixed.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mcmc::{
    check_iterations, draw_inv_gamma, Dataset, DrawAccumulator, PosteriorDraws, SamplerContext,
};
use crate::model::FactorModel;
use crate::prior::sphere_direction;
use crate::rng::RngStream;

/// Gibbs sampler in the scientific parameterization with flat priors on both
/// coefficient blocks. Requires `n > k + m`.
pub fn sample_flat_gamma(
    ds: &Dataset,
    fm: &FactorModel,
    n_iter: usize,
    n_warmup: usize,
    stream: RngStream,
) -> Result<PosteriorDraws> {
    check_iterations(n_iter, n_warmup)?;
    let ctx = SamplerContext::new(ds, fm)?;
    let (n, k, m) = (ctx.n(), ctx.k(), ctx.m());
    if n <= k + m {
        return Err(Error::Degenerate(format!(
            "need n > k + m for the augmented regression, got n={n}, k={k}, m={m}"
        )));
    }
    let cov_inv = linalg::sym_inv(ctx.cp.cov(), "conditional confounder covariance")?;
    let r2_law = Beta::new(m as f64 / 2.0, 0.5)
        .map_err(|e| Error::InvalidParam(format!("beta law: {e}")))?;

    let mut rng = stream.rng();
    // state: coefficients, residual variance, latent confounder rows
    let mut beta = ctx.ols.coef.clone();
    let mut gamma = DVector::<f64>::zeros(m);
    let mut sigma2_u = ctx.ols.resid_var();
    let mut latent = ctx.w_mu.clone();

    let mut acc = DrawAccumulator::new(k, m, n_iter - n_warmup);
    for it in 0..n_iter {
        // latent confounders given coefficients: Gaussian with a shared
        // precision across observations
        let precision = &cov_inv + &gamma * gamma.transpose() / sigma2_u;
        let chol = Cholesky::new(linalg::symmetrize(&precision))
            .ok_or_else(|| Error::Degenerate("latent precision not PD".to_string()))?;
        let resid_beta = &ctx.y - &ctx.x * &beta;
        for i in 0..n {
            let prior_part = &cov_inv * ctx.w_mu.row(i).transpose();
            let rhs = prior_part + &gamma * (resid_beta[i] / sigma2_u);
            let mean = chol.solve(&rhs);
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = chol
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .ok_or_else(|| Error::Degenerate("triangular solve failed".to_string()))?;
            latent.set_row(i, &(mean + noise).transpose());
        }

        // joint coefficient draw from the regression on [T U]
        let mut design = DMatrix::zeros(n, k + m);
        design.view_mut((0, 0), (n, k)).copy_from(&ctx.x);
        design.view_mut((0, k), (n, m)).copy_from(&latent);
        let gram = design.transpose() * &design;
        let gram_chol = Cholesky::new(linalg::symmetrize(&gram))
            .ok_or_else(|| Error::Degenerate("augmented design is rank deficient".to_string()))?;
        let coef_hat = gram_chol.solve(&(design.transpose() * &ctx.y));
        let z = DVector::from_fn(k + m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = gram_chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Degenerate("triangular solve failed".to_string()))?;
        let coef = &coef_hat + noise * sigma2_u.sqrt();
        beta = coef.rows(0, k).clone_owned();
        gamma = coef.rows(k, m).clone_owned();

        // residual variance: flat prior on the standard deviation
        let rss = (&ctx.y - design * coef).norm_squared();
        sigma2_u = draw_inv_gamma((n as f64 - 1.0) / 2.0, rss / 2.0, &mut rng);

        // interweave: holding the identified block (naive coefficients and
        // total residual variance) fixed, redraw the unidentified block from
        // its exact conditional: fraction Beta(m/2, 1/2), direction uniform
        let quad = (ctx.cp.cov() * &gamma).dot(&gamma);
        let sigma2_y = sigma2_u + quad;
        let beta_check = &beta + ctx.cp.mean_map().transpose() * &gamma;
        let r2: f64 = r2_law.sample(&mut rng);
        let d = sphere_direction(m, &mut rng);
        gamma = ctx.cp.cov_inv_sqrt() * d * (sigma2_y * r2).sqrt();
        beta = &beta_check - ctx.cp.mean_map().transpose() * &gamma;
        sigma2_u = sigma2_y * (1.0 - r2);

        if it < n_warmup {
            continue;
        }
        acc.push(it as u32, &beta, &gamma, &beta_check, r2, sigma2_y);
    }
    Ok(acc.finish(ds, 0))
}
