//! Bivariate geostatistics by the conditional construction: specify a
//! model for the first variable, a conditional covariance for the second
//! given the first, and an integrable interaction kernel; the
//! cross-covariances and the marginal covariance of the second variable
//! follow by integration over a BAU mesh.
//!
//! Asymmetric cross-dependence C12(s,u) != C21(s,u) arises exactly when
//! the kernel is asymmetric.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::covariance::CovarianceModel;
use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianSpec};
use crate::geom::{BauGrid, Location};
use crate::linalg;

/// The interaction function b(s, v) coupling the second variable at s to
/// the first variable at v. May be asymmetric.
#[derive(Clone)]
pub struct InteractionKernel {
    eval: Arc<dyn Fn(&Location, &Location) -> f64 + Send + Sync>,
}

impl fmt::Debug for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InteractionKernel")
    }
}

impl InteractionKernel {
    pub fn new(f: impl Fn(&Location, &Location) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(f) }
    }

    /// b = 0: the two variables decouple.
    pub fn zero() -> Self {
        Self::new(|_, _| 0.0)
    }

    /// Gaussian bump b(s,v) = amplitude * exp(-|s - v - shift|^2 / scale2).
    /// A nonzero shift makes the kernel, and hence the cross-covariance,
    /// asymmetric.
    pub fn gaussian_bump(amplitude: f64, shift: Vec<f64>, scale2: f64) -> Self {
        Self::new(move |s, v| {
            let d2: f64 = s
                .coords()
                .iter()
                .zip(v.coords())
                .zip(shift.iter().chain(std::iter::repeat(&0.0)))
                .map(|((a, b), h)| {
                    let d = a - b - h;
                    d * d
                })
                .sum();
            amplitude * (-d2 / scale2).exp()
        })
    }

    /// Local averaging kernel: b(s,v) = beta / |A(s)| when v falls in the
    /// BAU cell containing s, else 0. As the mesh refines, the derived
    /// cross-covariance approaches beta * C11.
    pub fn cell_average(grid: BauGrid, beta: f64) -> Self {
        Self::new(move |s, v| match grid.cell_containing(s) {
            Some(i) if grid.cell_containing(v) == Some(i) => beta / grid.cells()[i].volume,
            _ => 0.0,
        })
    }

    pub fn eval(&self, s: &Location, v: &Location) -> f64 {
        (self.eval)(s, v)
    }
}

/// Mean surface for one variable of the bivariate model.
#[derive(Debug, Clone)]
pub enum MeanFunction {
    Constant(f64),
    /// intercept + slopes . s
    Linear { intercept: f64, slopes: Vec<f64> },
}

impl MeanFunction {
    pub fn eval(&self, s: &Location) -> f64 {
        match self {
            MeanFunction::Constant(c) => *c,
            MeanFunction::Linear { intercept, slopes } => {
                intercept
                    + slopes
                        .iter()
                        .zip(s.coords())
                        .map(|(b, c)| b * c)
                        .sum::<f64>()
            }
        }
    }
}

/// Which variable of the bivariate model to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    One,
    Two,
}

/// The conditional-approach bivariate model: mean functions, the first
/// variable's covariance, the conditional covariance of the second given
/// the first, the interaction kernel, and the BAU integration mesh.
#[derive(Debug, Clone)]
pub struct BivariateModel {
    pub mu1: MeanFunction,
    pub mu2: MeanFunction,
    c11: CovarianceModel,
    c2_given_1: CovarianceModel,
    kernel: InteractionKernel,
    grid: BauGrid,
}

/// The four covariance blocks of the bivariate model over one location
/// set: C11(s,u), C12(s,u) = cov(Y1(s), Y2(u)), C21(s,u) = cov(Y2(s),
/// Y1(u)), and C22(s,u).
#[derive(Debug, Clone)]
pub struct CrossCovarianceSet {
    pub c11: DMatrix<f64>,
    pub c12: DMatrix<f64>,
    pub c21: DMatrix<f64>,
    pub c22: DMatrix<f64>,
}

impl BivariateModel {
    /// Requires an integration mesh of at least 4 cells per axis.
    pub fn new(
        mu1: MeanFunction,
        mu2: MeanFunction,
        c11: CovarianceModel,
        c2_given_1: CovarianceModel,
        kernel: InteractionKernel,
        grid: BauGrid,
    ) -> Result<Self> {
        if grid.resolution().iter().any(|&r| r < 4) {
            return Err(Error::GridTooCoarse);
        }
        Ok(Self { mu1, mu2, c11, c2_given_1, kernel, grid })
    }

    pub fn grid(&self) -> &BauGrid {
        &self.grid
    }

    pub fn c11(&self) -> &CovarianceModel {
        &self.c11
    }

    pub fn c2_given_1(&self) -> &CovarianceModel {
        &self.c2_given_1
    }

    /// Midpoint-rule weights and centroids of the integration mesh.
    fn mesh(&self) -> (Vec<Location>, DVector<f64>) {
        let centroids = self.grid.centroids();
        let weights = DVector::from_iterator(
            self.grid.n_cells(),
            self.grid.cells().iter().map(|c| c.volume),
        );
        (centroids, weights)
    }

    /// C11 evaluated between two location sets.
    fn c11_block(&self, a: &[Location], b: &[Location]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.c11.cov_between(&a[i], &b[j]))
    }

    /// Kernel evaluations b(s_i, v_j) over mesh columns.
    fn kernel_block(&self, s: &[Location], mesh: &[Location]) -> DMatrix<f64> {
        DMatrix::from_fn(s.len(), mesh.len(), |i, j| self.kernel.eval(&s[i], &mesh[j]))
    }

    /// cov(Y1(a_i), Y2(b_j)) = integral C11(a_i, v) b(b_j, v) dv,
    /// midpoint rule over the mesh.
    fn c12_block(&self, a: &[Location], b: &[Location]) -> DMatrix<f64> {
        let (mesh, w) = self.mesh();
        let k1 = self.c11_block(a, &mesh); // |a| x m
        let bk = self.kernel_block(b, &mesh); // |b| x m
        let mut weighted = bk;
        for j in 0..w.len() {
            for i in 0..weighted.nrows() {
                weighted[(i, j)] *= w[j];
            }
        }
        k1 * weighted.transpose()
    }

    /// cov(Y2(a_i), Y2(b_j)) = C2|1(a_i, b_j) + double integral of
    /// b(a_i, v) C11(v, w) b(b_j, w) dv dw.
    fn c22_block(&self, a: &[Location], b: &[Location]) -> DMatrix<f64> {
        let (mesh, w) = self.mesh();
        let mut ka = self.kernel_block(a, &mesh);
        let mut kb = self.kernel_block(b, &mesh);
        for j in 0..w.len() {
            for i in 0..ka.nrows() {
                ka[(i, j)] *= w[j];
            }
            for i in 0..kb.nrows() {
                kb[(i, j)] *= w[j];
            }
        }
        let g = self.c11_block(&mesh, &mesh);
        let mut out = DMatrix::from_fn(a.len(), b.len(), |i, j| {
            self.c2_given_1.cov_between(&a[i], &b[j])
        });
        out += ka * g * kb.transpose();
        out
    }

    /// Derives all four covariance blocks over one location set.
    pub fn cross_covariances(&self, locations: &[Location]) -> Result<CrossCovarianceSet> {
        for (i, s) in locations.iter().enumerate() {
            if !self.grid.window().contains(s) {
                return Err(Error::InvalidParameter {
                    name: "locations",
                    message: format!("location {i} lies outside the model window"),
                });
            }
        }
        let c11 = self.c11_block(locations, locations);
        let c12 = self.c12_block(locations, locations);
        // C21(s,u) = cov(Y2(s), Y1(u)) = C12(u,s)
        let c21 = c12.transpose();
        let mut c22 = self.c22_block(locations, locations);
        linalg::symmetrize(&mut c22);
        Ok(CrossCovarianceSet { c11, c12, c21, c22 })
    }

    /// Predicts one variable at s0 from observations of either or both
    /// variables, by exact Gaussian conditioning of the stacked joint.
    ///
    /// Returns the predictive (mean, variance).
    pub fn cokrige(
        &self,
        data1: Option<&SpatialDataset>,
        data2: Option<&SpatialDataset>,
        target: Variable,
        s0: &Location,
        noise: f64,
    ) -> Result<(f64, f64)> {
        if noise < 0.0 || !noise.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise",
                message: format!("measurement noise variance must be non-negative, got {noise}"),
            });
        }
        let locs1: Vec<Location> = data1.map_or(vec![], |d| d.locations().to_vec());
        let locs2: Vec<Location> = data2.map_or(vec![], |d| d.locations().to_vec());
        let (n1, n2) = (locs1.len(), locs2.len());
        let dim = n1 + n2 + 1;
        let s0v = vec![s0.clone()];

        // stacked order: [Y1(data1), Y2(data2), Y_target(s0)]
        let mut cov = DMatrix::zeros(dim, dim);
        cov.view_mut((0, 0), (n1, n1)).copy_from(&self.c11_block(&locs1, &locs1));
        cov.view_mut((n1, n1), (n2, n2)).copy_from(&self.c22_block(&locs2, &locs2));
        let c12 = self.c12_block(&locs1, &locs2);
        cov.view_mut((0, n1), (n1, n2)).copy_from(&c12);
        cov.view_mut((n1, 0), (n2, n1)).copy_from(&c12.transpose());
        match target {
            Variable::One => {
                let a = self.c11_block(&locs1, &s0v);
                cov.view_mut((0, n1 + n2), (n1, 1)).copy_from(&a);
                cov.view_mut((n1 + n2, 0), (1, n1)).copy_from(&a.transpose());
                // cov(Y2(data2), Y1(s0)) = C12(s0, data2) transposed
                let b = self.c12_block(&s0v, &locs2);
                cov.view_mut((n1, n1 + n2), (n2, 1)).copy_from(&b.transpose());
                cov.view_mut((n1 + n2, n1), (1, n2)).copy_from(&b);
                cov[(dim - 1, dim - 1)] = self.c11.variance();
            }
            Variable::Two => {
                let a = self.c12_block(&locs1, &s0v);
                cov.view_mut((0, n1 + n2), (n1, 1)).copy_from(&a);
                cov.view_mut((n1 + n2, 0), (1, n1)).copy_from(&a.transpose());
                let b = self.c22_block(&locs2, &s0v);
                cov.view_mut((n1, n1 + n2), (n2, 1)).copy_from(&b);
                cov.view_mut((n1 + n2, n1), (1, n2)).copy_from(&b.transpose());
                cov[(dim - 1, dim - 1)] = self.c22_block(&s0v, &s0v)[(0, 0)];
            }
        }
        linalg::symmetrize(&mut cov);

        let mut mean = DVector::zeros(dim);
        for (i, s) in locs1.iter().enumerate() {
            mean[i] = self.mu1.eval(s);
        }
        for (i, s) in locs2.iter().enumerate() {
            mean[n1 + i] = self.mu2.eval(s);
        }
        mean[dim - 1] = match target {
            Variable::One => self.mu1.eval(s0),
            Variable::Two => self.mu2.eval(s0),
        };

        let spec = GaussianSpec::new(mean, cov)?;
        let observed: Vec<usize> = (0..n1 + n2).collect();
        let values: Vec<f64> = data1
            .map_or(vec![], |d| d.values().to_vec())
            .into_iter()
            .chain(data2.map_or(vec![], |d| d.values().to_vec()))
            .collect();
        let noise_vec = vec![noise; n1 + n2];
        let cond = gaussian::condition(&spec, &observed, &values, &noise_vec)
            .map_err(|_| Error::SingularSystem)?;
        Ok((cond.mean()[0], cond.covariance()[(0, 0)]))
    }
}

impl CrossCovarianceSet {
    pub fn n(&self) -> usize {
        self.c11.nrows()
    }

    /// CSV form of one block.
    fn block_csv(m: &DMatrix<f64>) -> String {
        let mut out = String::new();
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// The four blocks as named CSV files plus a manifest.
    pub fn to_csv_files(&self) -> Vec<(String, String)> {
        let manifest = "block,file,rows,cols\n".to_string()
            + &format!("C11,c11.csv,{},{}\n", self.c11.nrows(), self.c11.ncols())
            + &format!("C12,c12.csv,{},{}\n", self.c12.nrows(), self.c12.ncols())
            + &format!("C21,c21.csv,{},{}\n", self.c21.nrows(), self.c21.ncols())
            + &format!("C22,c22.csv,{},{}\n", self.c22.nrows(), self.c22.ncols());
        vec![
            ("manifest.csv".into(), manifest),
            ("c11.csv".into(), Self::block_csv(&self.c11)),
            ("c12.csv".into(), Self::block_csv(&self.c12)),
            ("c21.csv".into(), Self::block_csv(&self.c21)),
            ("c22.csv".into(), Self::block_csv(&self.c22)),
        ]
    }
}

/// Assembles the full 2n x 2n joint covariance [[C11, C12], [C12', C22]]
/// and verifies the eigenvalue floor min >= -1e-8 * max diagonal.
pub fn joint_covariance_matrix(ccset: &CrossCovarianceSet) -> Result<DMatrix<f64>> {
    let n = ccset.n();
    if ccset.c12.nrows() != n || ccset.c21.nrows() != n || ccset.c22.nrows() != n {
        return Err(Error::DimensionMismatch("cross-covariance blocks disagree".into()));
    }
    let mut joint = DMatrix::zeros(2 * n, 2 * n);
    joint.view_mut((0, 0), (n, n)).copy_from(&ccset.c11);
    joint.view_mut((0, n), (n, n)).copy_from(&ccset.c12);
    // transpose identity keeps the joint symmetric by construction
    joint.view_mut((n, 0), (n, n)).copy_from(&ccset.c12.transpose());
    joint.view_mut((n, n), (n, n)).copy_from(&ccset.c22);
    linalg::symmetrize(&mut joint);

    let max_diag = joint.diagonal().iter().cloned().fold(0.0f64, f64::max);
    let min_eig = linalg::min_symmetric_eigenvalue(&joint);
    if min_eig < -1e-8 * max_diag.max(1.0) {
        return Err(Error::NotPositiveDefinite(format!(": min eigenvalue {min_eig:.3e}")));
    }
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{tessellate_baus, Window};
    use crate::kriging;
    use approx::assert_relative_eq;

    fn unit_grid(res: usize) -> BauGrid {
        tessellate_baus(&Window::unit_square(), &[res, res]).unwrap()
    }

    fn model_with(kernel: InteractionKernel, res: usize) -> BivariateModel {
        BivariateModel::new(
            MeanFunction::Constant(0.0),
            MeanFunction::Constant(0.0),
            CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap(),
            CovarianceModel::exponential(0.8, 0.3, 0.0).unwrap(),
            kernel,
            unit_grid(res),
        )
        .unwrap()
    }

    fn test_locations() -> Vec<Location> {
        vec![
            Location::xy(0.2, 0.3),
            Location::xy(0.7, 0.6),
            Location::xy(0.4, 0.9),
            Location::xy(0.9, 0.1),
        ]
    }

    #[test]
    fn zero_kernel_decouples() {
        let m = model_with(InteractionKernel::zero(), 8);
        let cc = m.cross_covariances(&test_locations()).unwrap();
        assert_eq!(cc.c12.amax(), 0.0);
        assert_eq!(cc.c21.amax(), 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let want = m
                    .c2_given_1()
                    .cov_between(&test_locations()[i], &test_locations()[j]);
                assert_relative_eq!(cc.c22[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let e = BivariateModel::new(
            MeanFunction::Constant(0.0),
            MeanFunction::Constant(0.0),
            CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap(),
            CovarianceModel::exponential(0.8, 0.3, 0.0).unwrap(),
            InteractionKernel::zero(),
            unit_grid(3),
        );
        assert!(matches!(e, Err(Error::GridTooCoarse)));
    }

    #[test]
    fn transpose_identity_exact() {
        let kernel = InteractionKernel::gaussian_bump(0.9, vec![0.15, 0.0], 0.05);
        let m = model_with(kernel, 12);
        let cc = m.cross_covariances(&test_locations()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(cc.c12[(i, j)], cc.c21[(j, i)], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn symmetric_kernel_gives_symmetric_cross_dependence() {
        // a symmetric kernel yields symmetric cross-dependence up to
        // quadrature and window-truncation error, so the kernel is kept
        // narrow and the locations interior
        let kernel = InteractionKernel::gaussian_bump(0.7, vec![0.0, 0.0], 0.0036);
        let locs = vec![
            Location::xy(0.35, 0.4),
            Location::xy(0.6, 0.55),
            Location::xy(0.45, 0.65),
        ];
        let m = model_with(kernel, 24);
        let cc = m.cross_covariances(&locs).unwrap();
        let worst = (&cc.c12 - &cc.c21).amax();
        assert!(worst < 1e-4, "max |C12 - C21| = {worst}");
        // contrast: the shifted kernel in the next test exceeds 0.01
    }

    #[test]
    fn shifted_kernel_is_asymmetric() {
        // fixture: shift (0.2, 0) makes C12 and C21 visibly different
        let kernel = InteractionKernel::gaussian_bump(1.0, vec![0.2, 0.0], 0.02);
        let m = model_with(kernel, 16);
        let cc = m.cross_covariances(&test_locations()).unwrap();
        let max_diff = (&cc.c12 - &cc.c21).amax();
        assert!(max_diff > 0.01, "max |C12 - C21| = {max_diff}");
    }

    #[test]
    fn cell_average_kernel_approaches_scaled_c11() {
        // as the mesh refines, C12 -> beta * C11 for the averaging kernel
        let beta = 0.6;
        let locs = vec![Location::xy(0.3, 0.4), Location::xy(0.8, 0.2)];
        let c11 = CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap();
        let mut errs = Vec::new();
        for res in [8usize, 16, 32] {
            let grid = unit_grid(res);
            let m = BivariateModel::new(
                MeanFunction::Constant(0.0),
                MeanFunction::Constant(0.0),
                c11.clone(),
                CovarianceModel::exponential(0.8, 0.3, 0.0).unwrap(),
                InteractionKernel::cell_average(grid.clone(), beta),
                grid,
            )
            .unwrap();
            let cc = m.cross_covariances(&locs).unwrap();
            let mut worst = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    let want = beta * c11.cov_between(&locs[i], &locs[j]);
                    worst = worst.max(((cc.c12[(i, j)] - want) / want).abs());
                }
            }
            errs.push(worst);
        }
        assert!(errs[2] < 0.05, "relative error at 32x32: {}", errs[2]);
        assert!(errs[2] <= errs[0], "refinement should not worsen: {errs:?}");
    }

    #[test]
    fn grid_refinement_converges() {
        // doubling the resolution shrinks the change between refinements
        let kernel = |g: &BauGrid| {
            let _ = g;
            InteractionKernel::gaussian_bump(0.8, vec![0.05, -0.05], 0.1)
        };
        let locs = test_locations();
        let value_at = |res: usize| {
            let g = unit_grid(res);
            let m = BivariateModel::new(
                MeanFunction::Constant(0.0),
                MeanFunction::Constant(0.0),
                CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap(),
                CovarianceModel::exponential(0.8, 0.3, 0.0).unwrap(),
                kernel(&g),
                g,
            )
            .unwrap();
            m.cross_covariances(&locs).unwrap()
        };
        let (a, b, c) = (value_at(8), value_at(16), value_at(32));
        let d1 = (&b.c22 - &a.c22).amax();
        let d2 = (&c.c22 - &b.c22).amax();
        assert!(d2 < 0.6 * d1, "refinement ratio {d2}/{d1}");
    }

    #[test]
    fn c22_diagonal_dominates_conditional() {
        let kernel = InteractionKernel::gaussian_bump(0.9, vec![0.0, 0.1], 0.05);
        let m = model_with(kernel, 12);
        let locs = test_locations();
        let cc = m.cross_covariances(&locs).unwrap();
        for (i, s) in locs.iter().enumerate() {
            let base = m.c2_given_1().cov_between(s, s);
            assert!(cc.c22[(i, i)] >= base - 1e-12);
        }
    }

    #[test]
    fn joint_matrix_is_psd_for_derived_blocks() {
        let kernel = InteractionKernel::gaussian_bump(1.2, vec![0.1, 0.05], 0.06);
        let m = model_with(kernel, 12);
        let cc = m.cross_covariances(&test_locations()).unwrap();
        let joint = joint_covariance_matrix(&cc).unwrap();
        assert_eq!(joint.nrows(), 8);
    }

    #[test]
    fn corrupted_cross_block_fails_psd() {
        let kernel = InteractionKernel::gaussian_bump(1.0, vec![0.0, 0.0], 0.5);
        let m = model_with(kernel, 10);
        let mut cc = m.cross_covariances(&test_locations()).unwrap();
        // doubled cross-covariances break validity for a strong kernel
        cc.c12 *= 4.0;
        cc.c21 *= 4.0;
        let e = joint_covariance_matrix(&cc);
        assert!(matches!(e, Err(Error::NotPositiveDefinite(_))), "{e:?}");
    }

    #[test]
    fn cokrige_without_second_data_is_simple_kriging() {
        let m = model_with(InteractionKernel::gaussian_bump(0.5, vec![0.0, 0.0], 0.1), 8);
        let ds1 = SpatialDataset::new(
            vec![Location::xy(0.2, 0.2), Location::xy(0.6, 0.4), Location::xy(0.4, 0.8)],
            vec![1.0, -0.5, 0.7],
            None,
        )
        .unwrap();
        let s0 = Location::xy(0.5, 0.5);
        let (mean, var) = m.cokrige(Some(&ds1), None, Variable::One, &s0, 0.01).unwrap();
        let r = kriging::simple_kriging(&ds1, m.c11(), |_| 0.0, &s0, 0.01).unwrap();
        assert_relative_eq!(mean, r.prediction, epsilon = 1e-10);
        assert_relative_eq!(var, r.variance, epsilon = 1e-10);
    }

    #[test]
    fn cokrige_decoupled_target_two_reverts_to_prior() {
        let m = model_with(InteractionKernel::zero(), 8);
        let ds1 = SpatialDataset::new(
            vec![Location::xy(0.2, 0.2), Location::xy(0.6, 0.4)],
            vec![1.0, -0.5],
            None,
        )
        .unwrap();
        let s0 = Location::xy(0.5, 0.5);
        let (mean, var) = m.cokrige(Some(&ds1), None, Variable::Two, &s0, 0.0).unwrap();
        assert_relative_eq!(mean, 0.0, epsilon = 1e-10);
        assert_relative_eq!(var, m.c2_given_1().variance(), epsilon = 1e-10);
    }

    #[test]
    fn second_variable_data_reduces_uncertainty() {
        // information monotonicity under Gaussian conditioning
        let kernel = InteractionKernel::gaussian_bump(0.8, vec![0.0, 0.0], 0.1);
        let m = model_with(kernel, 8);
        let mut state = 17u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10 {
            let locs1: Vec<Location> = (0..4).map(|_| Location::xy(next(), next())).collect();
            let locs2: Vec<Location> = (0..4).map(|_| Location::xy(next(), next())).collect();
            let ds1 = SpatialDataset::new(locs1, (0..4).map(|_| next()).collect(), None).unwrap();
            let ds2 = SpatialDataset::new(locs2, (0..4).map(|_| next()).collect(), None).unwrap();
            let s0 = Location::xy(next(), next());
            let (_, var_both) =
                m.cokrige(Some(&ds1), Some(&ds2), Variable::Two, &s0, 0.01).unwrap();
            let (_, var_two_only) =
                m.cokrige(None, Some(&ds2), Variable::Two, &s0, 0.01).unwrap();
            assert!(var_both <= var_two_only + 1e-10, "{var_both} vs {var_two_only}");
        }
    }

    #[test]
    fn csv_export_has_manifest_and_blocks() {
        let m = model_with(InteractionKernel::zero(), 8);
        let cc = m.cross_covariances(&test_locations()).unwrap();
        let files = cc.to_csv_files();
        assert_eq!(files.len(), 5);
        assert_eq!(files[0].0, "manifest.csv");
        assert!(files[0].1.contains("C21,c21.csv,4,4"));
        assert_eq!(files[2].1.lines().count(), 4);
    }

    #[test]
    fn locations_outside_window_rejected() {
        let m = model_with(InteractionKernel::zero(), 8);
        let e = m.cross_covariances(&[Location::xy(1.5, 0.5)]);
        assert!(e.is_err());
    }
}
