//! Small dense linear-algebra helpers shared by the verification modules.
//!
//! Everything at desk scale fits comfortably in dense matrices of dimension
//! a few hundred, so exact symmetric eigensolves are the workhorse; power
//! iteration is kept for the (large-ell) spectral-Forrelation path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Largest eigenvalue of a real symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Operator norm (largest absolute eigenvalue) of a real symmetric matrix.
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}

/// Operator norm of an arbitrary real matrix via the Gram matrix A^T A.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    max_eigenvalue(&gram).max(0.0).sqrt()
}

/// Top eigenpair of a real symmetric matrix by exact eigensolve.
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let dim = m.nrows();
    if dim == 0 {
        return (0.0, DVector::zeros(0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut best = 0usize;
    for i in 1..dim {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

/// Top eigenpair of a PSD symmetric matrix by power iteration from a
/// deterministic start vector, declared converged when successive Rayleigh
/// quotients differ by less than `tol`.
pub fn power_iteration(
    m: &DMatrix<f64>,
    start: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> (f64, DVector<f64>) {
    let mut v = start.clone();
    let norm = v.norm();
    if norm == 0.0 {
        return (0.0, v);
    }
    v /= norm;
    let mut lambda = (m * &v).dot(&v);
    for _ in 0..max_iter {
        let mut w = m * &v;
        let wn = w.norm();
        if wn == 0.0 {
            return (0.0, w);
        }
        w /= wn;
        let next = (m * &w).dot(&w);
        v = w;
        if (next - lambda).abs() < tol {
            return (next, v);
        }
        lambda = next;
    }
    (lambda, v)
}

/// Trace norm (sum of absolute eigenvalues) of a Hermitian complex matrix.
pub fn trace_norm_hermitian(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().map(|v| v.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_helpers_on_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((max_eigenvalue(&m) - 3.0).abs() < 1e-12);
        assert!((min_eigenvalue(&m) - 1.0).abs() < 1e-12);
        assert!((sym_op_norm(&m) - 3.0).abs() < 1e-12);
        assert!((op_norm(&m) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_matches_dense() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let start = DVector::from_element(3, 1.0);
        let (lam, _) = power_iteration(&m, &start, 1e-12, 10_000);
        assert!((lam - max_eigenvalue(&m)).abs() < 1e-8);
    }

    #[test]
    fn trace_norm_of_hermitian() {
        // diag(1, -2) has trace norm 3.
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(1, 1)] = Complex64::new(-2.0, 0.0);
        assert!((trace_norm_hermitian(&m) - 3.0).abs() < 1e-12);
    }
}

/// Applies a scalar function to a real symmetric matrix through its
/// eigendecomposition: f(M) = V f(D) V^T.
pub fn sym_matrix_function(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut d = DMatrix::zeros(m.nrows(), m.nrows());
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        d[(i, i)] = f(lambda);
    }
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}
