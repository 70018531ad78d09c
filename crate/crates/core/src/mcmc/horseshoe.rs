//! Global-local shrinkage sampler for the treatment effects in the
//! scientific parameterization.
//!
//! The shrunk coefficients carry half-Cauchy local and global scales in the
//! inverse-gamma auxiliary representation (Makalic & Schmidt, 2016), so all
//! scale updates are conjugate. A Gaussian slab factor with scale
//! `horseshoe_slab` multiplies the prior of each shrunk coefficient, which
//! caps the prior variance at the slab scale while keeping every conditional
//! closed-form; in the effective prior the coefficient precision is
//! `1/(tau^2 lambda_j^2) + 1/slab^2`.
//!
//! The confounder block keeps the scaled-fraction parameterization with a
//! uniform prior on the fraction and a uniform direction. Its joint update
//! with the residual variance is an independence Metropolis step proposed
//! from the conjugate posterior of the residual regression, accepted with
//! the prior-density ratio, plus likelihood-free random-walk moves along the
//! observationally flat direction that trade causal effect against
//! confounding at a fixed naive fit.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mcmc::{
    check_iterations, draw_inv_gamma, draw_mvn_from_precision, Dataset, DrawAccumulator,
    PosteriorDraws, PriorKind, PriorRegime, SamplerContext,
};
use crate::model::FactorModel;
use crate::rng::RngStream;

const MAX_REDRAWS: usize = 100;
const RIDGE_MOVES_PER_ITER: usize = 4;

struct HsScales {
    lambda2: Vec<f64>,
    nu: Vec<f64>,
    tau2: f64,
    xi: f64,
    tau0: f64,
    slab2: f64,
    frozen: bool,
    rejected: u64,
}

impl HsScales {
    fn new(p: usize, tau0: f64, slab: f64, fixed: Option<f64>) -> Self {
        Self {
            lambda2: vec![1.0; p],
            nu: vec![1.0; p],
            tau2: fixed.map_or(tau0 * tau0, |v| v * v),
            xi: 1.0,
            tau0,
            slab2: slab * slab,
            frozen: fixed.is_some(),
            rejected: 0,
        }
    }

    fn draw_positive<R: Rng + ?Sized>(&mut self, shape: f64, rate: f64, rng: &mut R) -> f64 {
        for _ in 0..MAX_REDRAWS {
            let v = draw_inv_gamma(shape, rate, rng);
            if v.is_finite() && v > 0.0 {
                return v;
            }
            self.rejected += 1;
        }
        // fall back to the prior scale rather than aborting the chain
        1.0
    }

    fn update<R: Rng + ?Sized>(&mut self, shrunk_beta: &[f64], rng: &mut R) {
        if self.frozen {
            return;
        }
        let p = shrunk_beta.len();
        for (j, b) in shrunk_beta.iter().enumerate() {
            let b2 = b * b;
            self.lambda2[j] =
                self.draw_positive(1.0, 1.0 / self.nu[j] + b2 / (2.0 * self.tau2), rng);
            self.nu[j] = self.draw_positive(1.0, 1.0 + 1.0 / self.lambda2[j], rng);
        }
        let quad: f64 = shrunk_beta
            .iter()
            .zip(&self.lambda2)
            .map(|(b, l2)| b * b / l2)
            .sum();
        self.tau2 = self.draw_positive((p as f64 + 1.0) / 2.0, 1.0 / self.xi + quad / 2.0, rng);
        self.xi = self.draw_positive(1.0, 1.0 / (self.tau0 * self.tau0) + 1.0 / self.tau2, rng);
    }

    /// Effective prior precision of shrunk coefficient `j`.
    fn precision(&self, j: usize) -> f64 {
        1.0 / (self.tau2 * self.lambda2[j]) + 1.0 / self.slab2
    }
}

/// Log density (up to constants) of the confounder coefficients under the
/// uniform-fraction, uniform-direction prior given the residual variance.
fn log_gamma_prior(quad: f64, sigma2: f64, m: usize, r2_upper: f64) -> f64 {
    let r2 = quad / sigma2;
    if r2 > r2_upper || r2 > 1.0 {
        return f64::NEG_INFINITY;
    }
    let radial = if m == 2 {
        0.0
    } else if r2 == 0.0 {
        return if m > 2 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    } else {
        (2.0 - m as f64) / 2.0 * r2.ln()
    };
    radial - (m as f64 / 2.0) * sigma2.ln()
}

/// Shrinkage sampler; `regime.kind` selects whether all effects or only the
/// designated subset are shrunk (the rest keep flat priors).
pub fn sample_horseshoe(
    ds: &Dataset,
    fm: &FactorModel,
    regime: &PriorRegime,
    n_iter: usize,
    n_warmup: usize,
    stream: RngStream,
) -> Result<PosteriorDraws> {
    let shrunk: Vec<usize> = match regime.kind {
        PriorKind::Horseshoe => (0..ds.k()).collect(),
        PriorKind::HorseshoeNc => regime
            .nc_indices
            .clone()
            .ok_or_else(|| Error::InvalidParam("missing control indices".to_string()))?,
        _ => {
            return Err(Error::InvalidParam(
                "sample_horseshoe requires a shrinkage regime".to_string(),
            ))
        }
    };
    regime.validate(ds.k())?;
    check_iterations(n_iter, n_warmup)?;
    let ctx = SamplerContext::new(ds, fm)?;
    let (n, k, m) = (ctx.n(), ctx.k(), ctx.m());
    if n <= k + m {
        return Err(Error::Degenerate(format!(
            "need n > k + m, got n={n}, k={k}, m={m}"
        )));
    }
    let r2_upper = regime.r2_upper;
    let sigma_hat = ctx.ols.resid_var().sqrt();
    let p = shrunk.len();
    let tau0 = regime.horseshoe_scale.unwrap_or_else(|| {
        // expected non-null fraction of 10%
        let p0 = (0.1 * p as f64).max(1.0);
        let ratio = if p0 >= p as f64 {
            1.0
        } else {
            p0 / (p as f64 - p0)
        };
        ratio * sigma_hat / (n as f64).sqrt()
    });
    let mut scales = HsScales::new(p, tau0, regime.horseshoe_slab, regime.fixed_scales);

    // residual-on-confounder-means regression pieces for the joint move
    let w = &ctx.w_mu;
    let q_gram = w.transpose() * w;
    let q_chol = nalgebra::Cholesky::new(linalg::symmetrize(&q_gram))
        .ok_or_else(|| Error::Degenerate("confounder mean design is rank deficient".to_string()))?;
    let cov = ctx.cp.cov().clone();
    let cov_inv_sqrt = ctx.cp.cov_inv_sqrt().clone();
    let mean_map_t = ctx.cp.mean_map().transpose();

    let mut rng = stream.rng();
    // init: zero effects, prior-drawn confounder block
    let mut beta = DVector::<f64>::zeros(k);
    let mut sigma2_y = ctx.ols.resid_var();
    let mut gamma = if r2_upper > 0.0 {
        let r2 = rng.random_range(0.0..r2_upper);
        let d = crate::prior::sphere_direction(m, &mut rng);
        &cov_inv_sqrt * d * (sigma2_y * r2).sqrt()
    } else {
        DVector::zeros(m)
    };

    let mut rw_scale = 0.1 * sigma_hat;
    let mut rw_accept = 0usize;
    let mut rw_total = 0usize;

    let mut acc = DrawAccumulator::new(k, m, n_iter - n_warmup);
    for it in 0..n_iter {
        // 1. shrinkage scales given the shrunk coefficients
        let shrunk_beta: Vec<f64> = shrunk.iter().map(|&j| beta[j]).collect();
        scales.update(&shrunk_beta, &mut rng);

        // 2. coefficients given the confounder block and scales
        let y_adj = &ctx.y - w * &gamma;
        let mut precision = &ctx.ols.xtx / sigma2_y;
        for (s, &j) in shrunk.iter().enumerate() {
            precision[(j, j)] += scales.precision(s);
        }
        let rhs = ctx.x.transpose() * &y_adj / sigma2_y;
        beta = draw_mvn_from_precision(&precision, &rhs, &mut rng)?;

        // 3. joint confounder-block and variance move
        let resid = &ctx.y - &ctx.x * &beta;
        if r2_upper == 0.0 {
            gamma.fill(0.0);
            sigma2_y = draw_inv_gamma(n as f64 / 2.0, resid.norm_squared() / 2.0, &mut rng);
        } else {
            let wt_e = w.transpose() * &resid;
            let gamma_hat = q_chol.solve(&wt_e);
            let rss = (resid.norm_squared() - gamma_hat.dot(&wt_e)).max(1e-12);
            let sigma2_prop = draw_inv_gamma((n - m) as f64 / 2.0, rss / 2.0, &mut rng);
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = q_chol
                .l()
                .transpose()
                .solve_upper_triangular(&z)
                .ok_or_else(|| Error::Degenerate("triangular solve failed".to_string()))?;
            let gamma_prop = &gamma_hat + noise * sigma2_prop.sqrt();
            let quad_prop = (&cov * &gamma_prop).dot(&gamma_prop);
            let quad_cur = (&cov * &gamma).dot(&gamma);
            let log_ratio = log_gamma_prior(quad_prop, sigma2_prop, m, r2_upper)
                - log_gamma_prior(quad_cur, sigma2_y, m, r2_upper);
            if log_ratio >= 0.0 || rng.random_range(0.0..1.0f64).ln() < log_ratio {
                gamma = gamma_prop;
                sigma2_y = sigma2_prop;
            }

            // 4. flat-direction random walk: shift confounding against the
            // causal effects without changing the implied naive fit
            for _ in 0..RIDGE_MOVES_PER_ITER {
                rw_total += 1;
                let step = &cov_inv_sqrt
                    * DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal))
                    * rw_scale;
                let gamma_new = &gamma + &step;
                let beta_new = &beta - &mean_map_t * &step;
                let quad_new = (&cov * &gamma_new).dot(&gamma_new);
                let quad_old = (&cov * &gamma).dot(&gamma);
                let mut log_r = log_gamma_prior(quad_new, sigma2_y, m, r2_upper)
                    - log_gamma_prior(quad_old, sigma2_y, m, r2_upper);
                for (s, &j) in shrunk.iter().enumerate() {
                    let pj = scales.precision(s);
                    log_r += 0.5 * pj * (beta[j] * beta[j] - beta_new[j] * beta_new[j]);
                }
                if log_r >= 0.0 || rng.random_range(0.0..1.0f64).ln() < log_r {
                    gamma = gamma_new;
                    beta = beta_new;
                    rw_accept += 1;
                }
            }
            // adapt the walk scale during warmup only
            if it < n_warmup && rw_total >= 200 {
                let rate = rw_accept as f64 / rw_total as f64;
                if rate > 0.45 {
                    rw_scale *= 1.4;
                } else if rate < 0.2 {
                    rw_scale /= 1.4;
                }
                rw_accept = 0;
                rw_total = 0;
            }
        }

        if it < n_warmup {
            continue;
        }
        let quad = (&cov * &gamma).dot(&gamma);
        let beta_check = &beta + &mean_map_t * &gamma;
        acc.push(
            it as u32,
            &beta,
            &gamma,
            &beta_check,
            quad / sigma2_y,
            sigma2_y,
        );
    }
    let mut draws = acc.finish(ds, scales.rejected);
    draws.rejected_updates = scales.rejected;
    Ok(draws)
}
