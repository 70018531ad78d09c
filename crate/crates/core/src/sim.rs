//! Synthetic data generators with known ground truth, used for testing the
//! bounds and samplers end to end.
//!
//! The built-in `TwoBlock` design has two groups of treatments: rows of the
//! loading matrix are identical within the first group and orthogonal to the
//! (identical) rows of the second group. The causal effects are zero under
//! the baseline variant, yet the naive regression sees `+1` on the first
//! group and `-1` on the second, entirely from confounding. Row scales are
//! chosen so that declaring a first-group treatment a negative control pins
//! the minimum confounding fraction at exactly two thirds of the generating
//! fraction (one third when the generating fraction is one half).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factor::TreatmentMatrix;
use crate::mcmc::Dataset;
use crate::model::{
    confounder_posterior, observed_params, ConfounderPosterior, FactorModel, ObservedOutcomeParams,
    OutcomeModel,
};
use crate::prior::sphere_direction;
use crate::rng::RngStream;

/// Loading structure of the generator.
#[derive(Debug, Clone)]
pub enum LoadingPattern {
    /// Two groups of identical rows, the groups mutually orthogonal, with
    /// scales pinned by the benchmark normalization. Requires `m = 2`.
    TwoBlock,
    /// Explicit loading matrix (treatment noise variance fixed at 1).
    Custom(DMatrix<f64>),
}

/// Which ground truth generates the (identical) observed distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpVariant {
    /// All causal effects zero; the naive pattern is pure confounding bias.
    NullEffects,
    /// No confounding; the naive pattern is the causal truth.
    NoConfounding,
    /// Confounding bias with the opposite sign; causal effects are twice the
    /// naive pattern.
    OppositeBias,
}

/// Configuration of the synthetic generator.
#[derive(Debug, Clone)]
pub struct DgpConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Baseline causal effects added on top of the variant's pattern.
    pub beta_true: DVector<f64>,
    /// Fraction of residual outcome variance explained by confounders,
    /// strictly inside (0, 1).
    pub r2_target: f64,
    pub loading_pattern: LoadingPattern,
    pub variant: DgpVariant,
    pub seed: u64,
}

impl DgpConfig {
    /// The benchmark design: two-block loadings, null effects, `m = 2`.
    pub fn two_block(n: usize, k: usize, r2_target: f64, seed: u64) -> Self {
        Self {
            n,
            k,
            m: 2,
            beta_true: DVector::zeros(k),
            r2_target,
            loading_pattern: LoadingPattern::TwoBlock,
            variant: DgpVariant::NullEffects,
            seed,
        }
    }

    pub fn with_variant(mut self, variant: DgpVariant) -> Self {
        self.variant = variant;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 || self.k < 2 || self.m < 1 {
            return Err(Error::InvalidParam(format!(
                "need n >= 1, k >= 2, m >= 1; got n={}, k={}, m={}",
                self.n, self.k, self.m
            )));
        }
        if !(self.r2_target > 0.0 && self.r2_target < 1.0) {
            return Err(Error::InvalidParam(format!(
                "r2_target must be strictly inside (0,1), got {}",
                self.r2_target
            )));
        }
        if self.beta_true.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "beta_true has {} entries for k={}",
                self.beta_true.len(),
                self.k
            )));
        }
        match &self.loading_pattern {
            LoadingPattern::TwoBlock => {
                if self.m != 2 {
                    return Err(Error::InvalidParam(
                        "two-block loadings require m = 2".to_string(),
                    ));
                }
            }
            LoadingPattern::Custom(b) => {
                if b.shape() != (self.k, self.m) {
                    return Err(Error::DimensionMismatch(format!(
                        "custom loadings are {}x{}, expected {}x{}",
                        b.nrows(),
                        b.ncols(),
                        self.k,
                        self.m
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything the generator knows that an analyst would not.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub factor: FactorModel,
    pub outcome: OutcomeModel,
    pub beta_check: DVector<f64>,
    pub sigma2_y_t: f64,
}

struct ResolvedDgp {
    factor: FactorModel,
    outcome: OutcomeModel,
}

/// Two-block row scales: the first group at `a = 1/sqrt(2 g2 - g1 + 1)`, the
/// second at `c = sqrt(2)`. Together with unit treatment noise this makes a
/// unit-contrast negative control on the first group imply
/// `r2_min = (2/3) r2_target`.
fn two_block_loadings(k: usize) -> Result<(DMatrix<f64>, usize)> {
    let g1 = k.div_ceil(2);
    let g2 = k - g1;
    if g2 == 0 {
        return Err(Error::InvalidParam(
            "two-block design needs k >= 2".to_string(),
        ));
    }
    let denom = 2.0 * g2 as f64 - g1 as f64 + 1.0;
    if denom <= 0.0 {
        return Err(Error::Degenerate(
            "two-block normalization infeasible for this group split".to_string(),
        ));
    }
    let a = 1.0 / denom.sqrt();
    let c = 2.0f64.sqrt();
    let mut b = DMatrix::zeros(k, 2);
    for i in 0..g1 {
        b[(i, 0)] = a;
    }
    for i in g1..k {
        b[(i, 1)] = c;
    }
    Ok((b, g1))
}

fn resolve(cfg: &DgpConfig) -> Result<ResolvedDgp> {
    cfg.validate()?;
    let noise_var = 1.0;
    let (loadings, base_gamma) = match &cfg.loading_pattern {
        LoadingPattern::TwoBlock => {
            let (b, g1) = two_block_loadings(cfg.k)?;
            // gamma that turns the +1/-1 naive pattern into pure bias:
            // beta_check_i = row_i . gamma / (group gram + noise)
            let a = b[(0, 0)];
            let c = b[(cfg.k - 1, 1)];
            let g2 = cfg.k - g1;
            let cap_a = g1 as f64 * a * a + noise_var;
            let cap_c = g2 as f64 * c * c + noise_var;
            let gamma = DVector::from_vec(vec![cap_a / a, -cap_c / c]);
            (b, gamma)
        }
        LoadingPattern::Custom(b) => {
            // direction drawn deterministically from the seed; scaled so the
            // confounding fraction hits the target with unit outcome noise
            let fm = FactorModel::new(b.clone(), noise_var)?;
            let cp = confounder_posterior(&fm)?;
            let mut rng = RngStream::new(cfg.seed).substream(1_000_003).rng();
            let d = sphere_direction(cfg.m, &mut rng);
            let scale = (cfg.r2_target / (1.0 - cfg.r2_target)).sqrt();
            (b.clone(), cp.cov_inv_sqrt() * d * scale)
        }
    };
    let factor = FactorModel::new(loadings, noise_var)?;
    let cp = confounder_posterior(&factor)?;
    let quad = (cp.cov() * &base_gamma).dot(&base_gamma);
    if quad <= 0.0 {
        return Err(Error::Degenerate("confounding signal vanished".to_string()));
    }
    // sigma2_y_tu so that quad / (sigma2_y_tu + quad) = r2_target
    let sigma2_y_tu = quad * (1.0 - cfg.r2_target) / cfg.r2_target;
    let sigma2_y_t = quad / cfg.r2_target;
    let bias_pattern = cp.mean_map().transpose() * &base_gamma;

    let (beta, gamma, noise) = match cfg.variant {
        DgpVariant::NullEffects => (cfg.beta_true.clone(), base_gamma, sigma2_y_tu),
        DgpVariant::OppositeBias => (
            &cfg.beta_true + &bias_pattern * 2.0,
            -base_gamma,
            sigma2_y_tu,
        ),
        // matched observed variance: all three variants produce the same
        // distribution over (T, Y)
        DgpVariant::NoConfounding => (
            &cfg.beta_true + &bias_pattern,
            DVector::zeros(cfg.m),
            sigma2_y_t,
        ),
    };
    let outcome = OutcomeModel::new(beta, gamma, noise)?;
    Ok(ResolvedDgp { factor, outcome })
}

/// Draw a dataset from the configured process.
pub fn generate(cfg: &DgpConfig) -> Result<(Dataset, GroundTruth)> {
    let resolved = resolve(cfg)?;
    let obs = observed_params(&resolved.outcome, &resolved.factor)?;
    let mut rng = RngStream::new(cfg.seed).rng();
    let (n, k, m) = (cfg.n, cfg.k, cfg.m);
    let b = resolved.factor.loadings();
    let sd_t = resolved.factor.noise_var().sqrt();
    let sd_y = resolved.outcome.sigma2_y_tu.sqrt();

    let mut treatments = DMatrix::zeros(n, k);
    let mut outcome = DVector::zeros(n);
    for i in 0..n {
        let u = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = b * &u + DVector::from_fn(k, |_, _| sd_t * rng.sample::<f64, _>(StandardNormal));
        outcome[i] = resolved.outcome.beta.dot(&t)
            + resolved.outcome.gamma.dot(&u)
            + sd_y * rng.sample::<f64, _>(StandardNormal);
        treatments.set_row(i, &t.transpose());
    }
    let names = (1..=k).map(|j| format!("t_{j}")).collect();
    let ds = Dataset::new(TreatmentMatrix::new(treatments, Some(names))?, outcome)?;
    let truth = GroundTruth {
        factor: resolved.factor,
        beta_check: obs.beta_check.clone(),
        sigma2_y_t: obs.sigma2_y_t,
        outcome: resolved.outcome,
    };
    Ok((ds, truth))
}

/// Exact population quantities for the configured process, with no sampling.
pub fn population_params(cfg: &DgpConfig) -> Result<(ObservedOutcomeParams, ConfounderPosterior)> {
    let resolved = resolve(cfg)?;
    let obs = observed_params(&resolved.outcome, &resolved.factor)?;
    let cp = confounder_posterior(&resolved.factor)?;
    Ok((obs, cp))
}
