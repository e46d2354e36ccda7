//! Envelope (skyline) storage and Cholesky factorization for sparse
//! symmetric positive-definite matrices in their natural ordering.
//!
//! Lattice precision matrices have most of their mass near the diagonal;
//! the skyline format stores, for each row, only the entries from the
//! first structural nonzero to the diagonal. Cholesky fill stays inside
//! that envelope, so the factorization never allocates outside it. No
//! reordering is applied: the factor equals the dense Cholesky factor of
//! the same matrix, entry for entry, which keeps sampling reproducible
//! against a dense reference.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric matrix in lower-skyline storage.
#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    n: usize,
    /// first stored column of each row (envelope start)
    first: Vec<usize>,
    /// row i holds columns first[i]..=i
    rows: Vec<Vec<f64>>,
}

impl SkylineMatrix {
    /// Builds from symmetric triplets; entries may address either
    /// triangle, duplicates are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in entries {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i},{j}) out of range for dimension {n}"
                )));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            first[r] = first[r].min(c);
        }
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for &(i, j, v) in entries {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            rows[r][c - first[r]] += v;
        }
        Ok(Self { n, first, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if c < self.first[r] {
            0.0
        } else {
            self.rows[r][c - self.first[r]]
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Cholesky factorization A = L L' inside the envelope.
    ///
    /// Fails with `NotPositiveDefinite` when a pivot is non-positive.
    pub fn cholesky(&self) -> Result<SkylineCholesky> {
        let n = self.n;
        let first = self.first.clone();
        let mut l: Vec<Vec<f64>> = self.rows.clone();
        for i in 0..n {
            for j in first[i]..=i {
                let start = first[i].max(first[j]);
                let mut sum = l[i][j - first[i]];
                for k in start..j {
                    sum -= l[i][k - first[i]] * l[j][k - first[j]];
                }
                if j < i {
                    l[i][j - first[i]] = sum / l[j][j - first[j]];
                } else {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            ": pivot {sum:.3e} at row {i}"
                        )));
                    }
                    l[i][j - first[i]] = sum.sqrt();
                }
            }
        }
        Ok(SkylineCholesky { n, first, l })
    }
}

/// Lower-triangular Cholesky factor in skyline storage.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    l: Vec<Vec<f64>>,
}

impl SkylineCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// log det(A) = 2 sum log L_ii
    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| self.l[i][i - self.first[i]].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves A x = b via forward then backward substitution.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.solve_lower(b);
        self.solve_upper(&y)
    }

    /// Solves L y = b.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let mut sum = b[i];
            for k in self.first[i]..i {
                sum -= self.l[i][k - self.first[i]] * y[k];
            }
            y[i] = sum / self.l[i][i - self.first[i]];
        }
        y
    }

    /// Solves L' x = y; this maps standard normals to draws with
    /// covariance A^{-1}.
    pub fn solve_upper(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.n);
        let mut x = DVector::zeros(self.n);
        for i in (0..self.n).rev() {
            let mut sum = y[i];
            // entries L[k][i] for k > i live in rows k with first[k] <= i
            for k in (i + 1)..self.n {
                if self.first[k] <= i {
                    sum -= self.l[k][i - self.first[k]] * x[k];
                }
            }
            x[i] = sum / self.l[i][i - self.first[i]];
        }
        x
    }

    pub fn l_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if j > i || j < self.first[i] {
                0.0
            } else {
                self.l[i][j - self.first[i]]
            }
        })
    }
}
