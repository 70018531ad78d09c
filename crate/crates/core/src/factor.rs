//! Fitting the treatment-side factor model from data.
//!
//! `fit_ppca` is the closed-form maximum-likelihood solution for the
//! isotropic Gaussian factor model (Tipping & Bishop, 1999): loadings are the
//! top eigenvectors of the sample covariance scaled by `sqrt(eig - sigma2)`,
//! and the noise variance is the mean of the discarded eigenvalues. The
//! fitted loadings are one representative of the rotation class; only
//! `B B' + sigma2 I` is meaningful.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::FactorModel;

/// An `n x k` matrix of observed treatments, optionally with column labels.
#[derive(Debug, Clone)]
pub struct TreatmentMatrix {
    data: DMatrix<f64>,
    column_names: Option<Vec<String>>,
}

impl TreatmentMatrix {
    pub fn new(data: DMatrix<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        if !linalg::all_finite_mat(&data) {
            return Err(Error::NonFinite("treatment matrix".to_string()));
        }
        if let Some(names) = &column_names {
            if names.len() != data.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "{} column names for {} columns",
                    names.len(),
                    data.ncols()
                )));
            }
        }
        Ok(Self { data, column_names })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_means(&self) -> DVector<f64> {
        DVector::from_fn(self.n_cols(), |j, _| self.data.column(j).mean())
    }

    /// Copy with each column shifted to mean zero.
    pub fn centered(&self) -> Self {
        let means = self.column_means();
        let mut data = self.data.clone();
        for j in 0..data.ncols() {
            data.column_mut(j).add_scalar_mut(-means[j]);
        }
        Self {
            data,
            column_names: self.column_names.clone(),
        }
    }

    /// Copy with each column scaled to unit sample standard deviation.
    /// Constant columns are rejected.
    pub fn standardized(&self) -> Result<Self> {
        if self.n_rows() < 2 {
            return Err(Error::Degenerate(
                "need at least 2 rows to standardize".to_string(),
            ));
        }
        let means = self.column_means();
        let mut data = self.data.clone();
        for j in 0..data.ncols() {
            let sd = (self
                .data
                .column(j)
                .iter()
                .map(|v| (v - means[j]).powi(2))
                .sum::<f64>()
                / (self.n_rows() as f64 - 1.0))
                .sqrt();
            if sd <= 0.0 {
                return Err(Error::Degenerate(format!("column {j} is constant")));
            }
            data.column_mut(j).scale_mut(1.0 / sd);
        }
        Self::new(data, self.column_names.clone())
    }

    /// Sample covariance of the centered columns (divisor `n - 1`).
    pub fn sample_cov(&self) -> Result<DMatrix<f64>> {
        let n = self.n_rows();
        if n < 2 {
            return Err(Error::Degenerate(
                "need at least 2 rows for a covariance".to_string(),
            ));
        }
        let centered = self.centered();
        let x = centered.data();
        Ok(x.transpose() * x / (n as f64 - 1.0))
    }
}

/// Sorted spectrum of the sample covariance, for choosing the confounder rank.
#[derive(Debug, Clone)]
pub struct ScreeResult {
    /// Eigenvalues in descending order, one per treatment.
    pub eigenvalues: Vec<f64>,
    /// Running fraction of total variance; ends at 1.
    pub cumulative_fraction: Vec<f64>,
}

/// Eigenvalues of the sample covariance of the (internally centered)
/// treatment columns, descending, with cumulative variance fractions.
pub fn scree(tm: &TreatmentMatrix) -> Result<ScreeResult> {
    let cov = tm.sample_cov()?;
    let (values, _) = linalg::sym_eigen_sorted(&cov);
    let eigenvalues: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "treatment matrix has zero variance".to_string(),
        ));
    }
    let mut running = 0.0;
    let cumulative_fraction = eigenvalues
        .iter()
        .map(|v| {
            running += v / total;
            running
        })
        .collect();
    Ok(ScreeResult {
        eigenvalues,
        cumulative_fraction,
    })
}

/// Maximum-likelihood fit of the isotropic factor model with `m` confounders.
///
/// Columns are centered internally. Requires `1 <= m < k` and more rows than
/// columns.
pub fn fit_ppca(tm: &TreatmentMatrix, m: usize) -> Result<FactorModel> {
    let (n, k) = (tm.n_rows(), tm.n_cols());
    if n < k + 1 {
        return Err(Error::Degenerate(format!(
            "need at least k+1 = {} rows to fit, got {n}",
            k + 1
        )));
    }
    fit_ppca_from_cov(&tm.sample_cov()?, m)
}

/// Same fit starting from a covariance matrix (for population inputs or
/// precomputed covariances).
pub fn fit_ppca_from_cov(cov: &DMatrix<f64>, m: usize) -> Result<FactorModel> {
    let k = cov.nrows();
    if cov.ncols() != k {
        return Err(Error::DimensionMismatch(
            "covariance must be square".to_string(),
        ));
    }
    if !linalg::all_finite_mat(cov) {
        return Err(Error::NonFinite("covariance".to_string()));
    }
    if m < 1 || m >= k {
        return Err(Error::InvalidParam(format!(
            "confounder rank must satisfy 1 <= m < k, got m={m}, k={k}"
        )));
    }
    let (values, vectors) = linalg::sym_eigen_sorted(cov);
    let noise_var = values.iter().skip(m).sum::<f64>() / (k - m) as f64;
    if noise_var <= 0.0 {
        return Err(Error::Degenerate(format!(
            "trailing eigenvalue mean is {noise_var}; data covariance is rank deficient"
        )));
    }
    let mut loadings = DMatrix::zeros(k, m);
    for j in 0..m {
        // eigenvalues below the noise floor contribute a zero loading column
        let scale = (values[j] - noise_var).max(0.0).sqrt();
        loadings.set_column(j, &(vectors.column(j) * scale));
    }
    FactorModel::new(loadings, noise_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::confounder_posterior;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn simulate_treatments(fm: &FactorModel, n: usize, seed: u64) -> TreatmentMatrix {
        let mut rng = RngStream::new(seed).rng();
        let (k, m) = (fm.n_treatments(), fm.n_confounders());
        let sd = fm.noise_var().sqrt();
        let mut data = DMatrix::zeros(n, k);
        for i in 0..n {
            let u = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = fm.loadings() * u
                + DVector::from_fn(k, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
            data.set_row(i, &t.transpose());
        }
        TreatmentMatrix::new(data, None).unwrap()
    }

    #[test]
    fn exact_recovery_from_population_covariance() {
        let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.8, 0.3, 0.0, -1.2, 0.4, 0.4]);
        let truth = FactorModel::new(b.clone(), 0.5).unwrap();
        let fitted = fit_ppca_from_cov(&truth.treatment_cov(), 2).unwrap();
        assert_abs_diff_eq!(fitted.noise_var(), 0.5, epsilon = 1e-10);
        // only the rotation class is identified: compare B B'
        let bbt_true = &b * b.transpose();
        let bbt_fit = fitted.loadings() * fitted.loadings().transpose();
        assert_abs_diff_eq!(bbt_fit, bbt_true, epsilon = 1e-9);
    }

    #[test]
    fn fitted_model_is_best_rank_m_reconstruction_of_sample_cov() {
        let b = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 1.0, 0.2, 0.0, 1.5, -0.6, 0.3, 0.2, 0.9]);
        let truth = FactorModel::new(b.clone(), 0.7).unwrap();
        let tm = simulate_treatments(&truth, 100_000, 7);
        let s = tm.sample_cov().unwrap();
        let fitted = fit_ppca(&tm, 2).unwrap();

        // oracle: reconstruct the rank-2 isotropic approximation directly
        // from the sample spectrum, independently of the fitting code path.
        let eig = crate::linalg::sym_eigen_sorted(&s);
        let sigma2 = eig.0.iter().skip(2).sum::<f64>() / 3.0;
        let mut recon = DMatrix::identity(5, 5) * sigma2;
        for j in 0..2 {
            let v = eig.1.column(j).clone_owned();
            recon += &v * v.transpose() * (eig.0[j] - sigma2);
        }
        let model_cov = fitted.treatment_cov();
        let rel = (&model_cov - &recon).norm() / recon.norm();
        assert!(rel < 1e-10, "reconstruction mismatch {rel}");

        // and the fit is close to the generating model at this sample size
        let bbt_true = &b * b.transpose();
        let bbt_fit = fitted.loadings() * fitted.loadings().transpose();
        let rel_truth = (&bbt_fit - &bbt_true).norm() / bbt_true.norm();
        assert!(rel_truth < 0.05, "fitted BB' off by {rel_truth}");
        assert!((fitted.noise_var() - 0.7).abs() < 0.02);
    }

    #[test]
    fn refit_on_regenerated_data_is_self_consistent() {
        let b = DMatrix::from_row_slice(4, 1, &[1.0, 0.7, -0.4, 0.9]);
        let truth = FactorModel::new(b, 0.5).unwrap();
        let fitted = fit_ppca(&simulate_treatments(&truth, 20_000, 3), 1).unwrap();
        let refit = fit_ppca(&simulate_treatments(&fitted, 20_000, 4), 1).unwrap();
        let bbt_a = fitted.loadings() * fitted.loadings().transpose();
        let bbt_b = refit.loadings() * refit.loadings().transpose();
        let rel = (&bbt_a - &bbt_b).norm() / bbt_a.norm();
        assert!(rel < 0.1, "self-consistency off by {rel}");
    }

    #[test]
    fn scree_flat_for_isotropic_population() {
        let fm = FactorModel::new(DMatrix::zeros(4, 1), 1.0).unwrap();
        let tm = simulate_treatments(&fm, 50_000, 11);
        let res = scree(&tm).unwrap();
        for v in &res.eigenvalues {
            assert!((v - 1.0).abs() < 0.05, "eigenvalue {v} not near 1");
        }
        assert_abs_diff_eq!(
            *res.cumulative_fraction.last().unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scree_cumulative_fraction_monotone_and_shift_invariant() {
        let b = DMatrix::from_row_slice(3, 1, &[2.0, 1.0, 0.5]);
        let fm = FactorModel::new(b, 0.3).unwrap();
        let tm = simulate_treatments(&fm, 500, 5);
        let res = scree(&tm).unwrap();
        for w in res.cumulative_fraction.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for w in res.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        // adding a constant to a column leaves the spectrum unchanged
        let mut shifted = tm.data().clone();
        shifted.column_mut(1).add_scalar_mut(42.0);
        let res2 = scree(&TreatmentMatrix::new(shifted, None).unwrap()).unwrap();
        for (a, b) in res.eigenvalues.iter().zip(&res2.eigenvalues) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn fit_rejects_bad_rank_and_degenerate_data() {
        let fm = FactorModel::new(DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]), 1.0).unwrap();
        let tm = simulate_treatments(&fm, 50, 2);
        assert!(fit_ppca(&tm, 3).is_err());
        assert!(fit_ppca(&tm, 0).is_err());
        // rank-deficient covariance: all trailing eigenvalues zero
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(fit_ppca_from_cov(&cov, 1).is_err());
        // too few rows
        let tiny = TreatmentMatrix::new(DMatrix::zeros(3, 3), None).unwrap();
        assert!(fit_ppca(&tiny, 1).is_err());
    }

    #[test]
    fn fitted_and_rotated_fit_agree_on_invariants() {
        let b = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.9, 0.1, 0.3, 1.2, -0.5, 0.6, 0.0, 0.8]);
        let fm = FactorModel::new(b.clone(), 0.4).unwrap();
        // rotate the loadings by an orthogonal matrix
        let theta: f64 = 0.83;
        let q =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let fm_rot = FactorModel::new(&b * &q, 0.4).unwrap();
        let cp = confounder_posterior(&fm).unwrap();
        let cp_rot = confounder_posterior(&fm_rot).unwrap();
        let (e1, _) = crate::linalg::sym_eigen_sorted(cp.cov());
        let (e2, _) = crate::linalg::sym_eigen_sorted(cp_rot.cov());
        assert_abs_diff_eq!(e1, e2, epsilon = 1e-10);
    }
}
