//! Small dense linear-algebra helpers shared across the crate.
//!
//! Inverses and square roots of symmetric matrices go through the symmetric
//! eigendecomposition so that `inv_sqrt` returns the unique symmetric
//! positive-definite root, and pseudoinverses go through the SVD with a
//! relative singular-value cutoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold for positive-definiteness checks: the
/// smallest eigenvalue must exceed `REL_EIG_TOL` times the largest.
pub const REL_EIG_TOL: f64 = 1e-10;

/// Relative singular-value cutoff below which the pseudoinverse treats a
/// singular value as zero.
pub const PINV_REL_TOL: f64 = 1e-10;

/// Force exact symmetry before an eigendecomposition.
pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (a + a.transpose())
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// descending. Returns `(eigenvalues, eigenvectors)` with eigenvectors in
/// matching column order.
pub(crate) fn sym_eigen_sorted(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = symmetrize(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

fn check_pd(values: &DVector<f64>, what: &str) -> Result<()> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max.is_finite() && min.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    if min <= REL_EIG_TOL * max.max(0.0) || max <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "{what}: eigenvalue range [{min:.3e}, {max:.3e}]"
        )));
    }
    Ok(())
}

/// Inverse of a symmetric positive-definite matrix via eigendecomposition.
pub(crate) fn sym_inv(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_sorted(a);
    check_pd(&values, what)?;
    let inv_diag = DMatrix::from_diagonal(&values.map(|v| 1.0 / v));
    Ok(symmetrize(&(&vectors * inv_diag * vectors.transpose())))
}

/// Unique symmetric positive-definite inverse square root.
pub(crate) fn sym_inv_sqrt(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_sorted(a);
    check_pd(&values, what)?;
    let inv_sqrt_diag = DMatrix::from_diagonal(&values.map(|v| 1.0 / v.sqrt()));
    Ok(symmetrize(
        &(&vectors * inv_sqrt_diag * vectors.transpose()),
    ))
}

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// `PINV_REL_TOL` times the largest are treated as zero. Returns the
/// pseudoinverse together with the numerical rank.
pub(crate) fn pseudo_inverse(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok((DMatrix::zeros(cols, rows), 0));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if !s_max.is_finite() {
        return Err(Error::NonFinite("pseudoinverse input".to_string()));
    }
    let cutoff = PINV_REL_TOL * s_max;
    let mut rank = 0usize;
    let s_inv = DVector::from_fn(svd.singular_values.len(), |i, _| {
        if svd.singular_values[i] > cutoff {
            rank += 1;
            1.0 / svd.singular_values[i]
        } else {
            0.0
        }
    });
    let pinv = v_t.transpose() * DMatrix::from_diagonal(&s_inv) * u.transpose();
    Ok((pinv, rank))
}

pub(crate) fn all_finite_mat(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub(crate) fn all_finite_vec(a: &DVector<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}
