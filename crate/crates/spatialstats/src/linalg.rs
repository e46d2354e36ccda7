//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal on a failed factorization.
pub(crate) const JITTER_REL: f64 = 1e-10;

/// Cholesky factorization with a single jitter-and-retry pass.
///
/// On failure, `JITTER_REL * max(diagonal)` is added to the diagonal once
/// and the factorization retried; a second failure is an error. Keeps
/// downstream solves deterministic.
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let jitter = JITTER_REL * max_diag.max(1.0);
    let mut b = a.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += jitter;
    }
    Cholesky::new(b).ok_or(Error::SingularCovariance)
}

/// Forces exact symmetry by averaging with the transpose.
pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Largest absolute asymmetry max |a_ij - a_ji|.
pub(crate) fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix (dense eigensolve).
pub(crate) fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        // rank-1 PSD matrix; plain Cholesky fails, jittered succeeds
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Cholesky::new(a.clone()).is_none());
        assert!(cholesky_with_jitter(&a).is_ok());
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_with_jitter(&a), Err(Error::SingularCovariance)));
    }

    #[test]
    fn min_eigenvalue_of_diag() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -0.5, 2.0]));
        let min = min_symmetric_eigenvalue(&a);
        assert!((min + 0.5).abs() < 1e-12);
    }
}
