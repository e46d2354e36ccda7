//! Exact Gaussian conditioning — the dense oracle that the rest of the
//! crate is tested against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// A multivariate Gaussian given by its mean vector and covariance matrix.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianSpec {
    /// Validates dimensions, finiteness, and symmetry (within 1e-12
    /// relative to the largest entry). Positive semidefiniteness is not
    /// eigen-checked here; factorizations downstream report
    /// `SingularCovariance` when it fails. Use [`GaussianSpec::validate_psd`]
    /// for an explicit check.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {n} but covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) || covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gaussian",
                message: "mean and covariance must be finite".into(),
            });
        }
        let scale = covariance.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
        if linalg::max_asymmetry(&covariance) > 1e-12 * scale {
            return Err(Error::InvalidParameter {
                name: "covariance",
                message: "covariance must be symmetric".into(),
            });
        }
        Ok(Self { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Checks the eigenvalue floor: all eigenvalues >= -1e-10 * max diagonal.
    pub fn validate_psd(&self) -> Result<()> {
        if self.dim() == 0 {
            return Ok(());
        }
        let max_diag = self.covariance.diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        let min = linalg::min_symmetric_eigenvalue(&self.covariance);
        if min < -1e-10 * max_diag.max(1.0) {
            return Err(Error::NotPositiveDefinite(format!(
                ": min eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// Log density at `x`, via Cholesky of the covariance.
    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "point has length {} but the distribution is {n}-dimensional",
                x.len()
            )));
        }
        let chol = linalg::cholesky_with_jitter(&self.covariance)?;
        let r = x - &self.mean;
        let half = chol.l().solve_lower_triangular(&r).ok_or(Error::SingularCovariance)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        Ok(-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + half.norm_squared()))
    }
}

/// Conditions a joint Gaussian on noisy observations of a subset of its
/// coordinates and returns the distribution of the remaining coordinates.
///
/// Observing `z_i = y_{obs_i} + e_i` with `e_i ~ Gau(0, noise_i)` gives
/// the exact posterior by dense factorization. With `noise = 0` this is
/// plain conditioning.
pub fn condition(
    spec: &GaussianSpec,
    observed: &[usize],
    values: &[f64],
    noise_variances: &[f64],
) -> Result<GaussianSpec> {
    let n = spec.dim();
    if observed.len() != values.len() || observed.len() != noise_variances.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indices, {} values, {} noise variances",
            observed.len(),
            values.len(),
            noise_variances.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in observed {
        if i >= n {
            return Err(Error::InvalidParameter {
                name: "observed",
                message: format!("index {i} out of range for dimension {n}"),
            });
        }
        if seen[i] {
            return Err(Error::InvalidParameter {
                name: "observed",
                message: format!("index {i} repeated"),
            });
        }
        seen[i] = true;
    }
    if noise_variances.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "noise_variances",
            message: "noise variances must be finite and non-negative".into(),
        });
    }

    let rest: Vec<usize> = (0..n).filter(|i| !seen[*i]).collect();
    let m = observed.len();
    let r = rest.len();

    if m == 0 {
        return Ok(spec.clone());
    }

    // partition the covariance
    let cov = spec.covariance();
    let mut sigma_oo = DMatrix::zeros(m, m);
    for (a, &i) in observed.iter().enumerate() {
        for (b, &j) in observed.iter().enumerate() {
            sigma_oo[(a, b)] = cov[(i, j)];
        }
        sigma_oo[(a, a)] += noise_variances[a];
    }
    let mut sigma_ro = DMatrix::zeros(r, m);
    for (a, &i) in rest.iter().enumerate() {
        for (b, &j) in observed.iter().enumerate() {
            sigma_ro[(a, b)] = cov[(i, j)];
        }
    }
    let mut sigma_rr = DMatrix::zeros(r, r);
    for (a, &i) in rest.iter().enumerate() {
        for (b, &j) in rest.iter().enumerate() {
            sigma_rr[(a, b)] = cov[(i, j)];
        }
    }

    let chol = linalg::cholesky_with_jitter(&sigma_oo)?;
    let innovation = DVector::from_iterator(
        m,
        observed.iter().zip(values).map(|(&i, &z)| z - spec.mean()[i]),
    );
    let weights = chol.solve(&sigma_ro.transpose()); // m x r: Sigma_oo^{-1} Sigma_or
    let mean_rest = DVector::from_iterator(r, rest.iter().map(|&i| spec.mean()[i]))
        + weights.transpose() * &innovation;
    let mut cov_rest = sigma_rr - &sigma_ro * weights;
    linalg::symmetrize(&mut cov_rest);

    GaussianSpec::new(mean_rest, cov_rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(mean: &[f64], cov_rows: &[&[f64]]) -> GaussianSpec {
        let n = mean.len();
        let flat: Vec<f64> = cov_rows.iter().flat_map(|r| r.iter().copied()).collect();
        GaussianSpec::new(
            DVector::from_row_slice(mean),
            DMatrix::from_row_slice(n, n, &flat),
        )
        .unwrap()
    }

    #[test]
    fn independence_leaves_prior() {
        let s = spec(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let c = condition(&s, &[0], &[3.0], &[0.0]).unwrap();
        assert_eq!(c.dim(), 1);
        assert_relative_eq!(c.mean()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(c.covariance()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bivariate_identity() {
        // rho = 0.5: conditional mean rho*z = 1.0, variance 1 - rho^2 = 0.75
        let s = spec(&[0.0, 0.0], &[&[1.0, 0.5], &[0.5, 1.0]]);
        let c = condition(&s, &[0], &[2.0], &[0.0]).unwrap();
        assert_relative_eq!(c.mean()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.covariance()[(0, 0)], 0.75, epsilon = 1e-12);
    }

    /// Gauss-Jordan inverse: an implementation path independent of the
    /// Cholesky route used by `condition`.
    fn gauss_jordan_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut m = a.clone();
        let mut inv = DMatrix::<f64>::identity(n, n);
        for col in 0..n {
            let mut piv = col;
            for row in (col + 1)..n {
                if m[(row, col)].abs() > m[(piv, col)].abs() {
                    piv = row;
                }
            }
            assert!(m[(piv, col)].abs() > 1e-14, "singular test matrix");
            m.swap_rows(col, piv);
            inv.swap_rows(col, piv);
            let d = m[(col, col)];
            for k in 0..n {
                m[(col, k)] /= d;
                inv[(col, k)] /= d;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = m[(row, col)];
                for k in 0..n {
                    m[(row, k)] -= f * m[(col, k)];
                    inv[(row, k)] -= f * inv[(col, k)];
                }
            }
        }
        inv
    }

    fn random_pd(n: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
        // deterministic LCG so the fixture is reproducible without rand
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let b = DMatrix::from_fn(n, n, |_, _| next());
        let cov = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
        let mean = DVector::from_fn(n, |_, _| next());
        (mean, cov)
    }

    #[test]
    fn matches_independent_dense_solve() {
        // oracle route: explicit joint inversion by Gauss-Jordan
        let (mean, cov) = random_pd(6, 42);
        let s = GaussianSpec::new(mean.clone(), cov.clone()).unwrap();
        let observed = [1usize, 3, 4];
        let values = [0.7, -1.1, 0.4];
        let noise = [0.0, 0.0, 0.0];
        let got = condition(&s, &observed, &values, &noise).unwrap();

        let rest = [0usize, 2, 5];
        let soo = DMatrix::from_fn(3, 3, |a, b| cov[(observed[a], observed[b])]);
        let sro = DMatrix::from_fn(3, 3, |a, b| cov[(rest[a], observed[b])]);
        let srr = DMatrix::from_fn(3, 3, |a, b| cov[(rest[a], rest[b])]);
        let soo_inv = gauss_jordan_inverse(&soo);
        let innov = DVector::from_fn(3, |a, _| values[a] - mean[observed[a]]);
        let want_mean = DVector::from_fn(3, |a, _| mean[rest[a]]) + &sro * &soo_inv * innov;
        let want_cov = &srr - &sro * &soo_inv * sro.transpose();

        for a in 0..3 {
            assert_relative_eq!(got.mean()[a], want_mean[a], epsilon = 1e-10);
            for b in 0..3 {
                assert_relative_eq!(got.covariance()[(a, b)], want_cov[(a, b)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn perfect_correlation_leaves_no_uncertainty() {
        // Sigma_ij = sqrt(Sigma_ii Sigma_jj) => conditional variance ~ 0
        let s = spec(&[0.0, 0.0], &[&[4.0, 2.0], &[2.0, 1.0]]);
        let c = condition(&s, &[0], &[1.0], &[0.0]).unwrap();
        assert!(c.covariance()[(0, 0)].abs() <= 1e-10);
    }

    #[test]
    fn empty_observation_returns_prior() {
        let (mean, cov) = random_pd(4, 7);
        let s = GaussianSpec::new(mean, cov).unwrap();
        let c = condition(&s, &[], &[], &[]).unwrap();
        assert_eq!(c.dim(), 4);
    }

    #[test]
    fn bad_indices_rejected() {
        let s = spec(&[0.0, 0.0], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(condition(&s, &[2], &[0.0], &[0.0]).is_err());
        assert!(condition(&s, &[0, 0], &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(condition(&s, &[0], &[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let e = GaussianSpec::new(
            DVector::from_row_slice(&[0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]),
        );
        assert!(e.is_err());
    }

    proptest! {
        /// Relabeling coordinates and permuting the joint consistently
        /// permutes the conditional.
        #[test]
        fn permutation_equivariance(seed in 0u64..500) {
            let n = 5usize;
            let (mean, cov) = random_pd(n, seed);
            let s = GaussianSpec::new(mean.clone(), cov.clone()).unwrap();
            let observed = [0usize, 2];
            let values = [0.3, -0.9];
            let noise = [0.1, 0.0];
            let base = condition(&s, &observed, &values, &noise).unwrap();

            // cyclic permutation: old index i lives at position perm[i]
            let perm: Vec<usize> = (0..n).map(|i| (i + 2) % n).collect();
            let pmean = DVector::from_fn(n, |i, _| mean[perm.iter().position(|&p| p == i).unwrap()]);
            let pcov = DMatrix::from_fn(n, n, |i, j| {
                let a = perm.iter().position(|&p| p == i).unwrap();
                let b = perm.iter().position(|&p| p == j).unwrap();
                cov[(a, b)]
            });
            let ps = GaussianSpec::new(pmean, pcov).unwrap();
            let pobs: Vec<usize> = observed.iter().map(|&i| perm[i]).collect();
            let permuted = condition(&ps, &pobs, &values, &noise).unwrap();

            // remaining indices sort ascending in both runs; map between them
            let rest: Vec<usize> = (0..n).filter(|i| !observed.contains(i)).collect();
            let prest: Vec<usize> = (0..n).filter(|i| !pobs.contains(i)).collect();
            for (a, &i) in rest.iter().enumerate() {
                let pa = prest.iter().position(|&p| p == perm[i]).unwrap();
                prop_assert!((base.mean()[a] - permuted.mean()[pa]).abs() < 1e-9);
                for (b, &j) in rest.iter().enumerate() {
                    let pb = prest.iter().position(|&p| p == perm[j]).unwrap();
                    prop_assert!(
                        (base.covariance()[(a, b)] - permuted.covariance()[(pa, pb)]).abs() < 1e-9
                    );
                }
            }
        }
    }
}
