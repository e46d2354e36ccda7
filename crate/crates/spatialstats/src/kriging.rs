//! Simple, ordinary, and universal kriging with kriging variances,
//! Gaussian maximum-likelihood parameter estimation, and prediction maps.
//!
//! Measurement noise enters as an additive diagonal on the data
//! covariance block; predictions target the noiseless attribute process.
//! The nugget is treated as micro-scale variation belonging to the
//! process itself: the micro-scale component at the prediction location
//! is independent of the one at every data location, so with a nonzero
//! nugget the predictor does not interpolate exactly even at a data site.

use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;

use crate::covariance::{self, CovarianceModel, Family};
use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::geom::{BauGrid, Location};
use crate::linalg;
use crate::optim::{self, SimplexOptions};

/// Mean structure for universal kriging.
#[derive(Debug, Clone)]
pub enum TrendSpec {
    /// unknown constant mean (ordinary kriging)
    Constant,
    /// intercept plus the spatial coordinates
    Linear,
    /// the dataset's covariate matrix; prediction locations must supply
    /// their own covariate vector (leading 1 included)
    External { prediction_covariates: Vec<f64> },
}

impl TrendSpec {
    /// Design matrix over the dataset, one row per observation.
    pub(crate) fn design(&self, dataset: &SpatialDataset) -> Result<DMatrix<f64>> {
        let n = dataset.n();
        match self {
            TrendSpec::Constant => Ok(DMatrix::from_element(n, 1, 1.0)),
            TrendSpec::Linear => {
                let d = dataset.dim();
                Ok(DMatrix::from_fn(n, d + 1, |i, j| {
                    if j == 0 {
                        1.0
                    } else {
                        dataset.locations()[i].coord(j - 1)
                    }
                }))
            }
            TrendSpec::External { .. } => dataset
                .covariates()
                .cloned()
                .ok_or(Error::RankDeficientTrend),
        }
    }

    /// Covariate vector at a prediction location.
    pub(crate) fn at(&self, s0: &Location) -> Result<DVector<f64>> {
        match self {
            TrendSpec::Constant => Ok(DVector::from_element(1, 1.0)),
            TrendSpec::Linear => {
                let mut v = vec![1.0];
                v.extend_from_slice(s0.coords());
                Ok(DVector::from_vec(v))
            }
            TrendSpec::External { prediction_covariates } => {
                if prediction_covariates.first() != Some(&1.0) {
                    return Err(Error::InvalidParameter {
                        name: "trend",
                        message: "prediction covariates must lead with the intercept 1".into(),
                    });
                }
                Ok(DVector::from_row_slice(prediction_covariates))
            }
        }
    }
}

/// A pointwise kriging answer: the predictor, its variance, and the
/// weights applied to the data (diagnostic).
#[derive(Debug, Clone)]
pub struct KrigingResult {
    pub prediction: f64,
    pub variance: f64,
    pub weights: DVector<f64>,
}

impl KrigingResult {
    pub fn standard_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Clamp tiny negative variances, reject larger ones.
fn finish_variance(v: f64, scale: f64) -> Result<f64> {
    let tol = 1e-10 * scale.max(1.0);
    if v < -tol {
        return Err(Error::SingularSystem);
    }
    Ok(v.max(0.0))
}

/// Covariance between the prediction target and a data location.
///
/// At exactly coincident locations only the continuous part (the sill)
/// carries over; the micro-scale nugget does not.
fn cross_cov(model: &CovarianceModel, s0: &Location, si: &Location) -> f64 {
    let d = s0.distance(si);
    if d == 0.0 {
        model.sill()
    } else {
        model.cov(d)
    }
}

fn data_covariance(
    model: &CovarianceModel,
    dataset: &SpatialDataset,
    noise: f64,
) -> Result<DMatrix<f64>> {
    if noise < 0.0 || !noise.is_finite() {
        return Err(Error::InvalidParameter {
            name: "noise",
            message: format!("measurement noise variance must be non-negative, got {noise}"),
        });
    }
    let mut a = covariance::gram_matrix(model, dataset.locations())?;
    for i in 0..a.nrows() {
        a[(i, i)] += noise;
    }
    Ok(a)
}

/// Simple kriging: best predictor under a known mean function.
///
/// Identical to exact Gaussian conditioning of the (n+1)-point joint on
/// the data.
pub fn simple_kriging(
    dataset: &SpatialDataset,
    model: &CovarianceModel,
    known_mean: impl Fn(&Location) -> f64,
    s0: &Location,
    noise: f64,
) -> Result<KrigingResult> {
    let a = data_covariance(model, dataset, noise)?;
    let chol = linalg::cholesky_with_jitter(&a).map_err(|_| Error::SingularSystem)?;
    let c0 = DVector::from_iterator(
        dataset.n(),
        dataset.locations().iter().map(|si| cross_cov(model, s0, si)),
    );
    let weights = chol.solve(&c0);
    let residuals = DVector::from_iterator(
        dataset.n(),
        dataset
            .locations()
            .iter()
            .zip(dataset.values())
            .map(|(si, &z)| z - known_mean(si)),
    );
    let prediction = known_mean(s0) + weights.dot(&residuals);
    let c00 = model.variance();
    let variance = finish_variance(c00 - weights.dot(&c0), c00)?;
    Ok(KrigingResult { prediction, variance, weights })
}

/// Shared KKT assembly for ordinary/universal kriging: the bordered
/// system [[A, X], [X', 0]], factored once and reused across targets.
struct KrigingSystem {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    p: usize,
}

impl KrigingSystem {
    fn build(
        dataset: &SpatialDataset,
        model: &CovarianceModel,
        trend: &TrendSpec,
        noise: f64,
    ) -> Result<Self> {
        let a = data_covariance(model, dataset, noise)?;
        let x = trend.design(dataset)?;
        let n = dataset.n();
        let p = x.ncols();
        // unbiasedness needs a full-rank design
        let rank = x.clone().svd(false, false).rank(1e-10 * (n.max(p) as f64));
        if rank < p {
            return Err(Error::RankDeficientTrend);
        }
        let mut kkt = DMatrix::zeros(n + p, n + p);
        kkt.view_mut((0, 0), (n, n)).copy_from(&a);
        kkt.view_mut((0, n), (n, p)).copy_from(&x);
        kkt.view_mut((n, 0), (p, n)).copy_from(&x.transpose());
        let lu = kkt.lu();
        Ok(Self { lu, n, p })
    }

    fn solve(
        &self,
        dataset: &SpatialDataset,
        model: &CovarianceModel,
        trend: &TrendSpec,
        s0: &Location,
    ) -> Result<KrigingResult> {
        let x0 = trend.at(s0)?;
        if x0.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "trend vector at the prediction location has length {} but the design has {} columns",
                x0.len(),
                self.p
            )));
        }
        let mut rhs = DVector::zeros(self.n + self.p);
        for (i, si) in dataset.locations().iter().enumerate() {
            rhs[i] = cross_cov(model, s0, si);
        }
        for j in 0..self.p {
            rhs[self.n + j] = x0[j];
        }
        let sol = self.lu.solve(&rhs).ok_or(Error::SingularSystem)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let weights = DVector::from_iterator(self.n, sol.iter().take(self.n).copied());
        let prediction = weights.dot(&DVector::from_row_slice(dataset.values()));
        let c00 = model.variance();
        // optimized MSPE: C(0) - lambda'c0 - m'x0
        let mut v = c00;
        for i in 0..self.n {
            v -= sol[i] * rhs[i];
        }
        for j in 0..self.p {
            v -= sol[self.n + j] * x0[j];
        }
        let variance = finish_variance(v, c00)?;
        Ok(KrigingResult { prediction, variance, weights })
    }
}

/// Ordinary kriging: unknown constant mean, weights constrained to sum
/// to one via the Lagrange (KKT) system.
pub fn ordinary_kriging(
    dataset: &SpatialDataset,
    model: &CovarianceModel,
    s0: &Location,
    noise: f64,
) -> Result<KrigingResult> {
    universal_kriging(dataset, model, &TrendSpec::Constant, s0, noise)
}

/// Universal kriging: best linear unbiased prediction under the mean
/// x(s)'beta with unknown beta, constraints X'lambda = x(s0).
pub fn universal_kriging(
    dataset: &SpatialDataset,
    model: &CovarianceModel,
    trend: &TrendSpec,
    s0: &Location,
    noise: f64,
) -> Result<KrigingResult> {
    let system = KrigingSystem::build(dataset, model, trend, noise)?;
    system.solve(dataset, model, trend, s0)
}

/// Outcome of a maximum-likelihood covariance fit.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub model: CovarianceModel,
    /// GLS trend-coefficient estimates at the optimum
    pub coefficients: DVector<f64>,
    /// whether the simplex met its tolerance within the iteration cap
    pub converged: bool,
}

/// Gaussian maximum-likelihood fit of (sill, range, nugget) with the
/// trend coefficients profiled out by generalized least squares.
///
/// Multi-start simplex search in log-parameter space.
pub fn fit_mle(dataset: &SpatialDataset, family: Family, trend: &TrendSpec) -> Result<MleFit> {
    let x = trend.design(dataset)?;
    let n = dataset.n();
    let p = x.ncols();
    if n < p + 2 {
        return Err(Error::TooFewObservations { n, p });
    }
    let z = DVector::from_row_slice(dataset.values());

    // data-driven scales for the starts
    let mean = z.iter().sum::<f64>() / n as f64;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let var = var.max(1e-12);
    let mut dmax = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dmax = dmax.max(dataset.locations()[i].distance(&dataset.locations()[j]));
        }
    }
    let dmax = dmax.max(1e-12);

    let locations = dataset.locations().to_vec();
    let fam = family.clone();
    let xo = x.clone();
    let zo = z.clone();
    let objective = move |theta: &[f64]| -> f64 {
        let model =
            match CovarianceModel::new(fam.clone(), theta[0].exp(), theta[1].exp(), theta[2].exp()) {
                Ok(m) => m,
                Err(_) => return f64::INFINITY,
            };
        let sigma = match covariance::gram_matrix(&model, &locations) {
            Ok(s) => s,
            Err(_) => return f64::INFINITY,
        };
        let chol = match nalgebra::Cholesky::new(sigma) {
            Some(c) => c,
            None => return f64::INFINITY,
        };
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let si_x = chol.solve(&xo);
        let si_z = chol.solve(&zo);
        let xtsx = xo.transpose() * &si_x;
        let beta = match xtsx.lu().solve(&(xo.transpose() * &si_z)) {
            Some(b) => b,
            None => return f64::INFINITY,
        };
        let r = &zo - &xo * &beta;
        let quad = r.dot(&chol.solve(&r));
        0.5 * (log_det + quad + n as f64 * (2.0 * std::f64::consts::PI).ln())
    };

    let starts: Vec<Vec<f64>> = [
        (var, 0.2 * dmax, 0.05 * var),
        (var, 0.05 * dmax, 0.05 * var),
        (0.5 * var, 0.5 * dmax, 0.5 * var),
        (var, 0.1 * dmax, 1e-3 * var),
        (2.0 * var, 0.3 * dmax, 0.2 * var),
    ]
    .iter()
    .map(|(s, r, g)| vec![s.ln(), r.ln(), g.ln()])
    .collect();

    let best = optim::multi_start(objective, &starts, &[0.7, 0.7, 1.5], &SimplexOptions::default())
        .ok_or_else(|| Error::FitDiverged("likelihood non-finite at every start".into()))?;
    if !best.fx.is_finite() {
        return Err(Error::FitDiverged("likelihood non-finite at optimum".into()));
    }

    let model = CovarianceModel::new(family, best.x[0].exp(), best.x[1].exp(), best.x[2].exp())?;
    // GLS coefficients at the optimum
    let sigma = covariance::gram_matrix(&model, dataset.locations())?;
    let chol = linalg::cholesky_with_jitter(&sigma)?;
    let si_x = chol.solve(&x);
    let xtsx = x.transpose() * &si_x;
    let beta = xtsx
        .lu()
        .solve(&(x.transpose() * chol.solve(&z)))
        .ok_or(Error::SingularSystem)?;
    Ok(MleFit { model, coefficients: beta, converged: best.converged })
}

/// Per-cell predictions and kriging standard errors over a BAU grid.
#[derive(Debug, Clone)]
pub struct PredictionMap {
    pub grid: BauGrid,
    pub predictions: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

impl PredictionMap {
    /// CSV export `cell_x,cell_y,prediction,standard_error`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("cell_x,cell_y,prediction,standard_error\n");
        for (i, c) in self.grid.cells().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.centroid.coord(0),
                if c.centroid.dim() > 1 { c.centroid.coord(1) } else { 0.0 },
                self.predictions[i],
                self.standard_errors[i]
            ));
        }
        out
    }
}

/// Universal kriging at every cell centroid of a grid. Cells are
/// independent and evaluated in parallel; output order is the grid's
/// cell order regardless of the schedule.
pub fn kriging_map(
    dataset: &SpatialDataset,
    model: &CovarianceModel,
    trend: &TrendSpec,
    grid: &BauGrid,
    noise: f64,
) -> Result<PredictionMap> {
    if matches!(trend, TrendSpec::External { .. }) {
        return Err(Error::InvalidParameter {
            name: "trend",
            message: "grid maps need per-cell covariates; use kriging_map_with_covariates".into(),
        });
    }
    kriging_map_inner(dataset, model, trend, grid, noise, None)
}

/// Like [`kriging_map`] but with an explicit covariate matrix over the
/// grid cells (leading all-ones column, one row per cell).
pub fn kriging_map_with_covariates(
    dataset: &SpatialDataset,
    model: &CovarianceModel,
    grid: &BauGrid,
    noise: f64,
    cell_covariates: &DMatrix<f64>,
) -> Result<PredictionMap> {
    if cell_covariates.nrows() != grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate rows for {} cells",
            cell_covariates.nrows(),
            grid.n_cells()
        )));
    }
    kriging_map_inner(
        dataset,
        model,
        &TrendSpec::External { prediction_covariates: vec![] },
        grid,
        noise,
        Some(cell_covariates),
    )
}

fn kriging_map_inner(
    dataset: &SpatialDataset,
    model: &CovarianceModel,
    trend: &TrendSpec,
    grid: &BauGrid,
    noise: f64,
    cell_covariates: Option<&DMatrix<f64>>,
) -> Result<PredictionMap> {
    let system = KrigingSystem::build(dataset, model, trend, noise)?;
    let results: Result<Vec<KrigingResult>> = grid
        .cells()
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let cell_trend;
            let trend_ref = match cell_covariates {
                Some(xc) => {
                    cell_trend = TrendSpec::External {
                        prediction_covariates: xc.row(i).iter().copied().collect(),
                    };
                    &cell_trend
                }
                None => trend,
            };
            system.solve(dataset, model, trend_ref, &cell.centroid)
        })
        .collect();
    let results = results?;
    Ok(PredictionMap {
        grid: grid.clone(),
        predictions: results.iter().map(|r| r.prediction).collect(),
        standard_errors: results.iter().map(|r| r.standard_error()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{self, GaussianSpec};
    use crate::geom::{tessellate_baus, Window};
    use approx::assert_relative_eq;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_add(3);
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random_dataset(n: usize, seed: u64) -> SpatialDataset {
        let mut next = lcg(seed);
        let locs: Vec<Location> = (0..n).map(|_| Location::xy(next(), next())).collect();
        let vals: Vec<f64> = (0..n).map(|_| next() * 4.0 - 2.0).collect();
        SpatialDataset::new(locs, vals, None).unwrap()
    }

    #[test]
    fn simple_kriging_interpolates_without_nugget() {
        let ds = SpatialDataset::new(
            vec![Location::xy(0.0, 0.0), Location::xy(1.0, 0.0)],
            vec![2.0, -1.0],
            None,
        )
        .unwrap();
        let m = CovarianceModel::exponential(1.0, 1.0, 0.0).unwrap();
        let r = simple_kriging(&ds, &m, |_| 0.0, &Location::xy(0.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(r.prediction, 2.0, epsilon = 1e-10);
        assert!(r.variance.abs() <= 1e-10);
    }

    #[test]
    fn simple_kriging_far_away_reverts_to_mean() {
        let ds = SpatialDataset::new(
            vec![Location::xy(0.0, 0.0), Location::xy(1.0, 0.0)],
            vec![2.0, -1.0],
            None,
        )
        .unwrap();
        // distance >> range: effectively no correlation
        let m = CovarianceModel::exponential(1.5, 1e-3, 0.0).unwrap();
        let r = simple_kriging(&ds, &m, |_| 0.7, &Location::xy(0.5, 5.0), 0.0).unwrap();
        assert_relative_eq!(r.prediction, 0.7, epsilon = 1e-9);
        assert_relative_eq!(r.variance, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn simple_kriging_two_point_closed_form() {
        // symmetric pair, target midway: hand-solvable 2x2 system
        let s1 = Location::xy(-0.5, 0.0);
        let s2 = Location::xy(0.5, 0.0);
        let ds = SpatialDataset::new(vec![s1, s2], vec![1.0, 3.0], None).unwrap();
        let m = CovarianceModel::exponential(1.0, 1.0, 0.0).unwrap();
        let r = simple_kriging(&ds, &m, |_| 0.0, &Location::xy(0.0, 0.0), 0.0).unwrap();
        // A = [[1, e^{-1}], [e^{-1}, 1]], c0 = [e^{-1/2}, e^{-1/2}]
        // lambda_i = e^{-1/2} / (1 + e^{-1}) by symmetry
        let rho = (-1.0f64).exp();
        let c = (-0.5f64).exp();
        let lam = c / (1.0 + rho);
        assert_relative_eq!(r.weights[0], lam, epsilon = 1e-12);
        assert_relative_eq!(r.weights[1], lam, epsilon = 1e-12);
        assert_relative_eq!(r.prediction, lam * 4.0, epsilon = 1e-12);
        assert_relative_eq!(r.variance, 1.0 - 2.0 * lam * c, epsilon = 1e-12);
    }

    #[test]
    fn simple_kriging_matches_gaussian_conditioning() {
        // the defining equivalence, on random instances
        for seed in 0..20 {
            let n = 3 + (seed % 7) as usize;
            let ds = random_dataset(n, seed);
            let m = CovarianceModel::exponential(1.2, 0.4, 0.1).unwrap();
            let mut next = lcg(seed + 1000);
            let s0 = Location::xy(next(), next());
            let noise = 0.05;

            let r = simple_kriging(&ds, &m, |_| 0.3, &s0, noise).unwrap();

            // joint over [s0, data]: prior mean 0.3 everywhere
            let mut locs = vec![s0.clone()];
            locs.extend_from_slice(ds.locations());
            let joint = covariance::gram_matrix(&m, &locs).unwrap();
            let spec = GaussianSpec::new(DVector::from_element(n + 1, 0.3), joint).unwrap();
            let obs: Vec<usize> = (1..=n).collect();
            let cond = gaussian::condition(&spec, &obs, ds.values(), &vec![noise; n]).unwrap();
            assert_relative_eq!(r.prediction, cond.mean()[0], epsilon = 1e-10);
            assert_relative_eq!(r.variance, cond.covariance()[(0, 0)], epsilon = 1e-10);
        }
    }

    #[test]
    fn ordinary_kriging_single_datum() {
        let ds = SpatialDataset::new(vec![Location::xy(0.2, 0.3)], vec![4.2], None).unwrap();
        let m = CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap();
        let r = ordinary_kriging(&ds, &m, &Location::xy(0.9, 0.9), 0.0).unwrap();
        assert_relative_eq!(r.weights[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.prediction, 4.2, epsilon = 1e-12);
    }

    #[test]
    fn ordinary_kriging_square_symmetry() {
        let locs = vec![
            Location::xy(0.0, 0.0),
            Location::xy(1.0, 0.0),
            Location::xy(1.0, 1.0),
            Location::xy(0.0, 1.0),
        ];
        let ds = SpatialDataset::new(locs, vec![1.0, 2.0, 3.0, 4.0], None).unwrap();
        let m = CovarianceModel::exponential(1.0, 0.7, 0.0).unwrap();
        let r = ordinary_kriging(&ds, &m, &Location::xy(0.5, 0.5), 0.0).unwrap();
        for i in 0..4 {
            assert_relative_eq!(r.weights[i], 0.25, epsilon = 1e-10);
        }
        assert_relative_eq!(r.prediction, 2.5, epsilon = 1e-10);
    }

    /// Independent KKT oracle: Gauss-Jordan elimination on the bordered
    /// system, sharing no factorization code with the implementation.
    fn kkt_oracle(
        ds: &SpatialDataset,
        m: &CovarianceModel,
        x: &DMatrix<f64>,
        x0: &DVector<f64>,
        s0: &Location,
        noise: f64,
    ) -> (DVector<f64>, f64) {
        let n = ds.n();
        let p = x.ncols();
        let a = data_covariance(m, ds, noise).unwrap();
        let dim = n + p;
        let mut aug = DMatrix::zeros(dim, dim + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&a);
        aug.view_mut((0, n), (n, p)).copy_from(x);
        aug.view_mut((n, 0), (p, n)).copy_from(&x.transpose());
        for i in 0..n {
            aug[(i, dim)] = cross_cov(m, s0, &ds.locations()[i]);
        }
        for j in 0..p {
            aug[(n + j, dim)] = x0[j];
        }
        let rhs = aug.column(dim).into_owned();
        // Gauss-Jordan with partial pivoting
        for col in 0..dim {
            let mut piv = col;
            for row in (col + 1)..dim {
                if aug[(row, col)].abs() > aug[(piv, col)].abs() {
                    piv = row;
                }
            }
            aug.swap_rows(col, piv);
            let d = aug[(col, col)];
            for k in col..=dim {
                aug[(col, k)] /= d;
            }
            for row in 0..dim {
                if row != col {
                    let f = aug[(row, col)];
                    for k in col..=dim {
                        aug[(row, k)] -= f * aug[(col, k)];
                    }
                }
            }
        }
        let sol = aug.column(dim).into_owned();
        let weights = DVector::from_iterator(n, sol.iter().take(n).copied());
        let mut v = m.variance();
        for i in 0..n {
            v -= sol[i] * rhs[i];
        }
        for j in 0..p {
            v -= sol[n + j] * x0[j];
        }
        (weights, v)
    }

    #[test]
    fn ordinary_kriging_matches_kkt_oracle() {
        for seed in 0..10 {
            let ds = random_dataset(10, seed * 3 + 1);
            let m = CovarianceModel::exponential(1.0, 0.3, 0.05).unwrap();
            let mut next = lcg(seed);
            let s0 = Location::xy(next(), next());
            let r = ordinary_kriging(&ds, &m, &s0, 0.02).unwrap();
            let x = DMatrix::from_element(10, 1, 1.0);
            let x0 = DVector::from_element(1, 1.0);
            let (w, v) = kkt_oracle(&ds, &m, &x, &x0, &s0, 0.02);
            for i in 0..10 {
                assert_relative_eq!(r.weights[i], w[i], epsilon = 1e-8);
            }
            assert_relative_eq!(r.variance, v, epsilon = 1e-8);
            // constraint holds exactly
            assert_relative_eq!(r.weights.sum(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn universal_kriging_constraints_hold() {
        for seed in 0..10 {
            let ds = random_dataset(12, seed * 7 + 5);
            let m = CovarianceModel::exponential(1.0, 0.4, 0.0).unwrap();
            let mut next = lcg(seed + 99);
            let s0 = Location::xy(next(), next());
            let r = universal_kriging(&ds, &m, &TrendSpec::Linear, &s0, 0.0).unwrap();
            // X' lambda = x(s0)
            let x = TrendSpec::Linear.design(&ds).unwrap();
            let x0 = TrendSpec::Linear.at(&s0).unwrap();
            let xt_l = x.transpose() * &r.weights;
            for j in 0..x0.len() {
                assert_relative_eq!(xt_l[j], x0[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn universal_with_intercept_only_is_ordinary() {
        let ds = random_dataset(8, 77);
        let m = CovarianceModel::exponential(1.0, 0.5, 0.1).unwrap();
        let s0 = Location::xy(0.4, 0.6);
        let ok = ordinary_kriging(&ds, &m, &s0, 0.01).unwrap();
        let uk = universal_kriging(&ds, &m, &TrendSpec::Constant, &s0, 0.01).unwrap();
        assert_relative_eq!(ok.prediction, uk.prediction, epsilon = 1e-12);
        assert_relative_eq!(ok.variance, uk.variance, epsilon = 1e-12);
    }

    #[test]
    fn universal_kriging_pure_nugget_is_ols() {
        // with no spatial correlation the BLUP collapses to the OLS fit
        let mut next = lcg(4242);
        let n = 25;
        let locs: Vec<Location> = (0..n).map(|_| Location::xy(next(), next())).collect();
        let vals: Vec<f64> = locs
            .iter()
            .map(|s| 1.0 + 2.0 * s.coord(0) - 0.5 * s.coord(1) + 0.3 * (next() - 0.5))
            .collect();
        let ds = SpatialDataset::new(locs, vals, None).unwrap();
        // pure nugget: negligible sill, all variance in the nugget
        let m = CovarianceModel::exponential(1e-12, 1.0, 1.0).unwrap();
        let s0 = Location::xy(0.3, 0.8);
        let r = universal_kriging(&ds, &m, &TrendSpec::Linear, &s0, 0.0).unwrap();

        // independent OLS oracle via normal equations
        let x = TrendSpec::Linear.design(&ds).unwrap();
        let z = DVector::from_row_slice(ds.values());
        let beta = (x.transpose() * &x).lu().solve(&(x.transpose() * z)).unwrap();
        let x0 = TrendSpec::Linear.at(&s0).unwrap();
        assert_relative_eq!(r.prediction, x0.dot(&beta), epsilon = 1e-8);
    }

    #[test]
    fn universal_kriging_exact_at_datum() {
        let ds = random_dataset(6, 11);
        let m = CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap();
        let s0 = ds.locations()[2].clone();
        let z2 = ds.values()[2];
        let r = universal_kriging(&ds, &m, &TrendSpec::Linear, &s0, 0.0).unwrap();
        assert_relative_eq!(r.prediction, z2, epsilon = 1e-8);
    }

    #[test]
    fn translation_invariance_of_kriging_variance() {
        let ds = random_dataset(9, 31);
        let shifted = SpatialDataset::new(
            ds.locations().to_vec(),
            ds.values().iter().map(|v| v + 5.0).collect(),
            None,
        )
        .unwrap();
        let m = CovarianceModel::exponential(1.0, 0.3, 0.05).unwrap();
        let s0 = Location::xy(0.5, 0.5);
        let a = ordinary_kriging(&ds, &m, &s0, 0.01).unwrap();
        let b = ordinary_kriging(&shifted, &m, &s0, 0.01).unwrap();
        assert_relative_eq!(b.prediction, a.prediction + 5.0, epsilon = 1e-10);
        assert_relative_eq!(b.variance, a.variance, epsilon = 1e-10);
    }

    #[test]
    fn deleting_a_datum_never_shrinks_simple_kriging_variance() {
        let m = CovarianceModel::exponential(1.0, 0.5, 0.1).unwrap();
        for seed in 0..10 {
            let ds = random_dataset(8, seed + 500);
            let mut next = lcg(seed);
            let s0 = Location::xy(next(), next());
            let full = simple_kriging(&ds, &m, |_| 0.0, &s0, 0.0).unwrap();
            // drop the last datum
            let reduced =
                SpatialDataset::new(ds.locations()[..7].to_vec(), ds.values()[..7].to_vec(), None)
                    .unwrap();
            let less = simple_kriging(&reduced, &m, |_| 0.0, &s0, 0.0).unwrap();
            assert!(less.variance >= full.variance - 1e-12);
        }
    }

    #[test]
    fn rank_deficient_trend_rejected() {
        // third covariate column is a multiple of the second
        let locs = vec![
            Location::xy(0.0, 0.0),
            Location::xy(1.0, 0.0),
            Location::xy(0.0, 1.0),
            Location::xy(1.0, 1.0),
        ];
        let x = DMatrix::from_fn(4, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let ds = SpatialDataset::new(locs, vec![1.0, 2.0, 3.0, 4.0], Some(x)).unwrap();
        let m = CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap();
        let e = universal_kriging(
            &ds,
            &m,
            &TrendSpec::External { prediction_covariates: vec![1.0, 0.5, 1.0] },
            &Location::xy(0.5, 0.5),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(e, Error::RankDeficientTrend));
    }

    #[test]
    fn fit_mle_needs_enough_observations() {
        let ds = random_dataset(2, 1);
        let e = fit_mle(&ds, Family::Exponential, &TrendSpec::Constant).unwrap_err();
        assert!(matches!(e, Error::TooFewObservations { .. }));
    }

    #[test]
    fn map_matches_pointwise_calls() {
        let ds = random_dataset(7, 123);
        let m = CovarianceModel::exponential(1.0, 0.4, 0.05).unwrap();
        let grid = tessellate_baus(&Window::unit_square(), &[3, 3]).unwrap();
        let map = kriging_map(&ds, &m, &TrendSpec::Constant, &grid, 0.01).unwrap();
        for (i, cell) in grid.cells().iter().enumerate() {
            let r = ordinary_kriging(&ds, &m, &cell.centroid, 0.01).unwrap();
            assert_relative_eq!(map.predictions[i], r.prediction, epsilon = 1e-12);
            assert_relative_eq!(map.standard_errors[i], r.standard_error(), epsilon = 1e-12);
        }
    }

    #[test]
    fn map_at_datum_is_exact() {
        let ds = SpatialDataset::new(vec![Location::xy(0.5, 0.5)], vec![2.5], None).unwrap();
        let m = CovarianceModel::exponential(1.0, 0.5, 0.0).unwrap();
        let grid = tessellate_baus(&Window::unit_square(), &[1, 1]).unwrap();
        let map = kriging_map(&ds, &m, &TrendSpec::Constant, &grid, 0.0).unwrap();
        assert_relative_eq!(map.predictions[0], 2.5, epsilon = 1e-10);
        assert!(map.standard_errors[0] <= 1e-6);
    }

    #[test]
    fn standard_error_reflects_data_density() {
        // cluster of data bottom-left; SE near the cluster < SE far away
        let mut next = lcg(9);
        let locs: Vec<Location> =
            (0..12).map(|_| Location::xy(0.2 * next(), 0.2 * next())).collect();
        let vals: Vec<f64> = (0..12).map(|_| next()).collect();
        let ds = SpatialDataset::new(locs, vals, None).unwrap();
        let m = CovarianceModel::exponential(1.0, 0.3, 0.0).unwrap();
        let grid = tessellate_baus(&Window::unit_square(), &[5, 5]).unwrap();
        let map = kriging_map(&ds, &m, &TrendSpec::Constant, &grid, 0.0).unwrap();
        let near = grid.cells().iter().position(|c| c.grid_index == [0, 0]).unwrap();
        let far = grid.cells().iter().position(|c| c.grid_index == [4, 4]).unwrap();
        assert!(
            map.standard_errors[near] < map.standard_errors[far],
            "near {} vs far {}",
            map.standard_errors[near],
            map.standard_errors[far]
        );
    }
}
