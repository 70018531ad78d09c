//! Cross-regime sampler invariants: feasibility of every retained draw,
//! chain convergence on identified parameters, reproducibility, and the
//! pointwise log-likelihood contract.

mod common;

use nalgebra::DMatrix;
use partialid::factor::fit_ppca;
use partialid::mcmc::{
    pointwise_loglik, run_chains, sample_flat_gamma, sample_transparent, series_rhat, Dataset,
    PosteriorDraws, PriorKind, PriorRegime,
};
use partialid::sim::{generate, DgpConfig};
use partialid::stats::mean;
use partialid::RngStream;

fn benchmark_data(seed: u64) -> (Dataset, partialid::model::FactorModel) {
    let cfg = DgpConfig::two_block(1000, 10, 0.5, seed);
    let (ds, _) = generate(&cfg).unwrap();
    let fm = fit_ppca(ds.treatments(), 2).unwrap();
    (ds, fm)
}

#[test]
fn every_regime_keeps_draws_feasible() {
    let (ds, fm) = benchmark_data(81);
    let regimes = vec![
        PriorRegime::r2_uniform(1.0),
        PriorRegime::flat_gamma(),
        PriorRegime::negative_control(vec![0], 1.0),
        PriorRegime::horseshoe(1.0),
        PriorRegime::horseshoe_nc(vec![0, 1, 2, 3, 4], 1.0),
    ];
    for regime in regimes {
        let kind = regime.kind;
        let draws = run_chains(&ds, &fm, &regime, 600, 200, 2, RngStream::new(5)).unwrap();
        assert_eq!(draws.n_draws(), 2 * 400, "draw count for {kind:?}");
        for i in 0..draws.n_draws() {
            let gamma = draws.gamma.row(i).transpose();
            let quad = (fit_cov(&fm) * &gamma).dot(&gamma);
            assert!(
                quad <= draws.sigma2_y_t[i] * (1.0 + 1e-8),
                "{kind:?}: draw {i} violates the feasibility ellipsoid"
            );
            let r2_from_gamma = quad / draws.sigma2_y_t[i];
            assert!(
                (r2_from_gamma - draws.r2[i]).abs() < 1e-8,
                "{kind:?}: stored fraction inconsistent with gamma"
            );
        }
    }
}

fn fit_cov(fm: &partialid::model::FactorModel) -> DMatrix<f64> {
    partialid::model::confounder_posterior(fm)
        .unwrap()
        .cov()
        .clone()
}

#[test]
fn split_rhat_below_threshold_on_identified_params() {
    let (ds, fm) = benchmark_data(82);
    for kind in [PriorKind::R2Uniform, PriorKind::FlatGamma] {
        let regime = match kind {
            PriorKind::R2Uniform => PriorRegime::r2_uniform(1.0),
            _ => PriorRegime::flat_gamma(),
        };
        let draws = run_chains(&ds, &fm, &regime, 4000, 2000, 4, RngStream::new(9)).unwrap();
        for j in 0..ds.k() {
            let r = series_rhat(&draws, &draws.beta_check_column(j));
            assert!(r < 1.05, "{kind:?}: rhat {r} on naive coefficient {j}");
        }
        let r = series_rhat(&draws, &draws.sigma2_y_t);
        assert!(r < 1.05, "{kind:?}: rhat {r} on residual variance");
    }
}

#[test]
fn run_chains_reproducible_and_chain_labeled() {
    let (ds, fm) = benchmark_data(83);
    let regime = PriorRegime::r2_uniform(0.9);
    let a = run_chains(&ds, &fm, &regime, 300, 100, 3, RngStream::new(7)).unwrap();
    let b = run_chains(&ds, &fm, &regime, 300, 100, 3, RngStream::new(7)).unwrap();
    assert_eq!(a.beta, b.beta);
    assert_eq!(a.chain_id, b.chain_id);
    let mut ids = a.chain_id.clone();
    ids.dedup();
    assert_eq!(ids, vec![0, 1, 2]);
}

#[test]
fn pointwise_loglik_contract() {
    let (ds, fm) = benchmark_data(84);
    // a hand-built single draw with zero residuals and unit variance
    let fit = partialid::mcmc::ols(ds.treatments().data(), ds.outcome()).unwrap();
    let exact_y = ds.treatments().data() * &fit.coef;
    let exact_ds = Dataset::new(ds.treatments().clone(), exact_y).unwrap();
    let one = PosteriorDraws {
        beta: DMatrix::zeros(1, ds.k()),
        gamma: DMatrix::zeros(1, 2),
        beta_check: DMatrix::from_fn(1, ds.k(), |_, j| fit.coef[j]),
        r2: vec![0.0],
        sigma2_y_t: vec![1.0],
        chain_id: vec![0],
        iteration: vec![0],
        pointwise_loglik: DMatrix::zeros(0, 0),
        rejected_updates: 0,
        nc_residual_norm: None,
        nc_projected: false,
    };
    let ll = pointwise_loglik(&one, &exact_ds);
    let expect = -0.5 * (2.0 * std::f64::consts::PI).ln();
    for j in 0..exact_ds.n() {
        assert!((ll[(0, j)] - expect).abs() < 1e-12);
    }

    // additivity: row sums equal the full-data log likelihood
    let draws = sample_transparent(
        &ds,
        &fm,
        &PriorRegime::r2_uniform(1.0),
        50,
        10,
        RngStream::new(1),
    )
    .unwrap();
    let x = ds.treatments().data();
    for i in 0..draws.n_draws() {
        let beta_check = draws.beta_check.row(i).transpose();
        let sigma2 = draws.sigma2_y_t[i];
        let resid = ds.outcome() - x * beta_check;
        let full = -0.5 * ds.n() as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
            - resid.norm_squared() / (2.0 * sigma2);
        let row_sum: f64 = draws.pointwise_loglik.row(i).iter().sum();
        assert!((row_sum - full).abs() < 1e-8 * (1.0 + full.abs()));
    }
}

#[test]
fn unrestricted_regimes_fit_equally_well() {
    // the flat and uniform-fraction priors have no observable implications,
    // so their posterior mean log likelihoods agree within Monte Carlo error
    let (ds, fm) = benchmark_data(85);
    let tr = sample_transparent(
        &ds,
        &fm,
        &PriorRegime::r2_uniform(1.0),
        3000,
        1000,
        RngStream::new(2),
    )
    .unwrap();
    let fl = sample_flat_gamma(&ds, &fm, 3000, 1000, RngStream::new(3)).unwrap();
    let total = |d: &PosteriorDraws| -> Vec<f64> {
        (0..d.n_draws())
            .map(|i| d.pointwise_loglik.row(i).iter().sum::<f64>())
            .collect()
    };
    let (a, b) = (total(&tr), total(&fl));
    let (ma, mb) = (mean(&a), mean(&b));
    let se = (partialid::stats::variance(&a) / a.len() as f64
        + partialid::stats::variance(&b) / b.len() as f64)
        .sqrt();
    assert!(
        (ma - mb).abs() < 4.0 * se + 0.05 * ma.abs().max(1.0) * 0.01,
        "mean log likelihoods differ: {ma} vs {mb} (se {se})"
    );
}
