//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)] // each test binary uses a different subset
//!
//! The oracles here recompute the quantities under test through different
//! routes than the library: LU inverses instead of eigendecompositions,
//! Gram-Schmidt projections instead of pseudoinverses, and grid-plus-refine
//! sphere sweeps instead of closed-form norms.

use nalgebra::{DMatrix, DVector};
use partialid::RngStream;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha12Rng {
    RngStream::new(seed).rng()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_vector(len: usize, rng: &mut ChaCha12Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_unit(len: usize, rng: &mut ChaCha12Rng) -> DVector<f64> {
    loop {
        let v = random_vector(len, rng);
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(m: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    random_matrix(m, m, rng).qr().q()
}

/// Plain LU-based inverse, an independent route from the library's
/// eigendecomposition inverses.
pub fn lu_inv(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().try_inverse().expect("invertible")
}

/// Test-side symmetric inverse square root via an eigendecomposition done
/// here rather than through library helpers.
pub fn inv_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for j in 0..eig.eigenvalues.len() {
        let v = eig.eigenvectors.column(j);
        out += v * v.transpose() / eig.eigenvalues[j].sqrt();
    }
    out
}

/// Conditional confounder pieces computed the pedestrian way from the
/// loading matrix: `mean_map = B'(BB' + s2 I)^{-1}` via LU, and the
/// conditional covariance from its definition.
pub struct OracleModel {
    pub mean_map: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    pub cov_inv_sqrt: DMatrix<f64>,
}

impl OracleModel {
    pub fn new(b: &DMatrix<f64>, noise_var: f64) -> Self {
        let k = b.nrows();
        let m = b.ncols();
        let marginal = b * b.transpose() + DMatrix::identity(k, k) * noise_var;
        let mean_map = b.transpose() * lu_inv(&marginal);
        let cov = DMatrix::identity(m, m) - &mean_map * b;
        let cov_inv_sqrt = inv_sqrt(&cov);
        Self {
            mean_map,
            cov,
            cov_inv_sqrt,
        }
    }

    pub fn scaled_mean_diff(&self, delta: &DVector<f64>) -> DVector<f64> {
        &self.cov_inv_sqrt * (&self.mean_map * delta)
    }
}

/// Orthonormal basis of the span of `cols` (Gram-Schmidt with a relative
/// tolerance) and an orthonormal basis of its complement in `R^m`.
pub fn span_and_complement(
    m: usize,
    cols: &[DVector<f64>],
    rng: &mut ChaCha12Rng,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let scale = cols
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() > 1e-9 * scale {
            let n = v.norm();
            basis.push(v / n);
        }
    }
    let span_dim = basis.len();
    let mut full = basis.clone();
    while full.len() < m {
        let mut v = random_unit(m, rng);
        for b in &full {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() > 1e-6 {
            let n = v.norm();
            full.push(v / n);
        }
    }
    let complement = full.split_off(span_dim);
    (basis, complement)
}

/// Maximize `f` over the unit sphere of the given dimension by a coarse
/// sweep followed by a shrinking local pattern search. Deterministic given
/// the rng.
pub fn max_on_unit_sphere<F: Fn(&DVector<f64>) -> f64>(
    dim: usize,
    f: &F,
    n_coarse: usize,
    rng: &mut ChaCha12Rng,
) -> f64 {
    assert!(dim >= 1);
    if dim == 1 {
        let e = DVector::from_vec(vec![1.0]);
        return f(&e).max(f(&(-e)));
    }
    let mut best_u = DVector::zeros(dim);
    let mut best = f64::NEG_INFINITY;
    if dim == 2 {
        for i in 0..n_coarse {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n_coarse as f64;
            let u = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            let val = f(&u);
            if val > best {
                best = val;
                best_u = u;
            }
        }
    } else {
        for _ in 0..n_coarse {
            let u = random_unit(dim, rng);
            let val = f(&u);
            if val > best {
                best = val;
                best_u = u;
            }
        }
    }
    // local pattern search with shrinking steps
    let mut h = 0.05;
    while h > 1e-10 {
        let mut improved = false;
        for j in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut cand = best_u.clone();
                cand[j] += sign * h;
                let n = cand.norm();
                if n < 1e-12 {
                    continue;
                }
                cand /= n;
                let val = f(&cand);
                if val > best {
                    best = val;
                    best_u = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}

/// Min and max of `center + g(u)` over the unit sphere (sweeps both signs).
pub fn sphere_range<F: Fn(&DVector<f64>) -> f64>(
    dim: usize,
    f: &F,
    n_coarse: usize,
    rng: &mut ChaCha12Rng,
) -> (f64, f64) {
    let max = max_on_unit_sphere(dim, f, n_coarse, rng);
    let neg = max_on_unit_sphere(dim, &|u: &DVector<f64>| -f(u), n_coarse, rng);
    (-neg, max)
}
