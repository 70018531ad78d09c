//! Property tests for the model identities and bound invariants.

mod common;

use common::*;
use partialid::bounds::worst_case_interval;
use partialid::model::{
    bias_of, confounder_posterior, gamma_from_spec, mu_delta, observed_params, recover_beta,
    Contrast, FactorModel, OutcomeModel, SensitivitySpec,
};
use proptest::prelude::*;
use rand::Rng;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=5).prop_flat_map(|k| (Just(k), 1usize..=k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Replacing the loadings by any rotation of themselves (and rotating
    /// gamma along) leaves every observable quantity and the bias unchanged.
    #[test]
    fn rotation_leaves_observables_unchanged(
        (k, m) in dims(),
        seed in 0u64..1_000_000,
        noise in 0.1f64..3.0,
        sigma2_y_tu in 0.1f64..3.0,
    ) {
        let mut r = rng(seed);
        let b = random_matrix(k, m, &mut r);
        let beta = random_vector(k, &mut r);
        let gamma = random_vector(m, &mut r);
        let q = random_orthogonal(m, &mut r);

        let fm = FactorModel::new(b.clone(), noise).unwrap();
        let fm_q = FactorModel::new(&b * &q, noise).unwrap();
        let om = OutcomeModel::new(beta.clone(), gamma.clone(), sigma2_y_tu).unwrap();
        let om_q = OutcomeModel::new(beta, q.transpose() * &gamma, sigma2_y_tu).unwrap();

        let obs = observed_params(&om, &fm).unwrap();
        let obs_q = observed_params(&om_q, &fm_q).unwrap();
        prop_assert!((&obs.beta_check - &obs_q.beta_check).norm() < 1e-10);
        prop_assert!((obs.sigma2_y_t - obs_q.sigma2_y_t).abs() < 1e-10);

        let contrast = Contrast::new(random_vector(k, &mut r), random_vector(k, &mut r)).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let cp_q = confounder_posterior(&fm_q).unwrap();
        let bias = bias_of(&om.gamma, &mu_delta(&cp, &contrast).unwrap()).unwrap();
        let bias_q = bias_of(&om_q.gamma, &mu_delta(&cp_q, &contrast).unwrap()).unwrap();
        prop_assert!((bias - bias_q).abs() < 1e-10);
    }

    /// The sensitivity parameterization always lands inside the feasibility
    /// ellipsoid, with the quadratic form hitting r2 exactly.
    #[test]
    fn sensitivity_gamma_respects_ellipsoid(
        (k, m) in dims(),
        seed in 0u64..1_000_000,
        noise in 0.1f64..3.0,
        sigma2_y_t in 0.1f64..4.0,
        r2 in 0.0f64..=1.0,
    ) {
        let mut r = rng(seed);
        let fm = FactorModel::new(random_matrix(k, m, &mut r), noise).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let spec = SensitivitySpec::new(r2, random_unit(m, &mut r)).unwrap();
        let gamma = gamma_from_spec(&spec, sigma2_y_t, &cp).unwrap();
        let quad = (cp.cov() * &gamma).dot(&gamma);
        prop_assert!((quad / sigma2_y_t - r2).abs() < 1e-10);
        prop_assert!(quad <= sigma2_y_t * (1.0 + 1e-10));
    }

    /// Observable decomposition round trip recovers the causal coefficients.
    #[test]
    fn transparent_round_trip(
        (k, m) in dims(),
        seed in 0u64..1_000_000,
        noise in 0.1f64..3.0,
        sigma2_y_tu in 0.1f64..3.0,
    ) {
        let mut r = rng(seed);
        let fm = FactorModel::new(random_matrix(k, m, &mut r), noise).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let beta = random_vector(k, &mut r);
        let gamma = random_vector(m, &mut r);
        let om = OutcomeModel::new(beta.clone(), gamma.clone(), sigma2_y_tu).unwrap();
        let obs = observed_params(&om, &fm).unwrap();
        let back = recover_beta(&obs, &gamma, &cp).unwrap();
        prop_assert!((&back - &beta).norm() < 1e-10);
        prop_assert!(obs.sigma2_y_t >= sigma2_y_tu);
    }

    /// Confounder-mean differences chain linearly across contrasts.
    #[test]
    fn mean_differences_are_linear(
        (k, m) in dims(),
        seed in 0u64..1_000_000,
    ) {
        let mut r = rng(seed);
        let fm = FactorModel::new(random_matrix(k, m, &mut r), 0.5).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let (t1, t2, t3) = (
            random_vector(k, &mut r),
            random_vector(k, &mut r),
            random_vector(k, &mut r),
        );
        let ab = mu_delta(&cp, &Contrast::new(t1.clone(), t2.clone()).unwrap()).unwrap();
        let bc = mu_delta(&cp, &Contrast::new(t2, t3.clone()).unwrap()).unwrap();
        let ac = mu_delta(&cp, &Contrast::new(t1, t3).unwrap()).unwrap();
        prop_assert!((&ab + &bc - ac).norm() < 1e-10);
    }

    /// Worst-case intervals are nested in the confounding fraction and the
    /// causal-effect interval always straddles the naive effect.
    #[test]
    fn worst_case_nested_in_r2(
        (k, m) in dims(),
        seed in 0u64..1_000_000,
        r2_lo in 0.0f64..0.5,
        bump in 0.0f64..0.5,
        naive in -3.0f64..3.0,
    ) {
        let mut r = rng(seed);
        let fm = FactorModel::new(random_matrix(k, m, &mut r), 0.8).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let c = Contrast::new(random_vector(k, &mut r), random_vector(k, &mut r)).unwrap();
        let small = worst_case_interval(&cp, &c, 1.5, r2_lo, naive).unwrap();
        let large = worst_case_interval(&cp, &c, 1.5, r2_lo + bump, naive).unwrap();
        prop_assert!(large.half_width >= small.half_width - 1e-12);
        let (lo, hi) = large.pate();
        prop_assert!(lo <= naive + 1e-12 && naive <= hi + 1e-12);
    }

    /// Sphere samples always have unit rows.
    #[test]
    fn sphere_rows_unit(m in 1usize..6, seed in 0u64..1_000_000, n in 1usize..50) {
        let draws = partialid::prior::sample_sphere(m, n, partialid::RngStream::new(seed)).unwrap();
        for i in 0..n {
            prop_assert!((draws.row(i).norm() - 1.0).abs() < 1e-12);
        }
    }
}

/// Conditional covariance eigenvalues always land in (0, 1].
#[test]
fn cov_spectrum_in_unit_interval() {
    for seed in 0..50u64 {
        let mut r = rng(seed);
        let k = r.random_range(1..=6usize);
        let m = r.random_range(1..=k);
        let fm = FactorModel::new(random_matrix(k, m, &mut r), r.random_range(0.05..4.0)).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let eig = cp.cov().clone().symmetric_eigen();
        for v in eig.eigenvalues.iter() {
            assert!(*v > 0.0 && *v <= 1.0 + 1e-10, "eigenvalue {v}");
        }
    }
}
