//! Stationary covariance families, semivariograms, empirical variogram
//! estimation, weighted-least-squares fitting, and Gram matrices.

use nalgebra::DMatrix;

use crate::dataset::SpatialDataset;
use crate::error::{Error, Result};
use crate::geom::{check_distinct, Location};
use crate::optim::{self, SimplexOptions};
use crate::special::{bessel_k, ln_gamma};

/// Isotropic correlation family.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Exponential,
    Gaussian,
    /// Compactly supported: zero beyond the range.
    Spherical,
    /// Matern with fixed smoothness nu > 0; nu = 1/2 recovers the
    /// exponential family.
    Matern { smoothness: f64 },
}

impl Family {
    /// Correlation at scaled distance t = h / range, for h > 0.
    fn correlation(&self, t: f64) -> f64 {
        match self {
            Family::Exponential => (-t).exp(),
            Family::Gaussian => (-t * t).exp(),
            Family::Spherical => {
                if t >= 1.0 {
                    0.0
                } else {
                    1.0 - 1.5 * t + 0.5 * t * t * t
                }
            }
            Family::Matern { smoothness: nu } => {
                // 2^(1-nu)/Gamma(nu) * t^nu * K_nu(t); continuous limit 1 at t -> 0
                if t < 1e-10 {
                    return 1.0;
                }
                let log_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(*nu);
                (log_c + nu * t.ln()).exp() * bessel_k(*nu, t)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Gaussian => "gaussian",
            Family::Spherical => "spherical",
            Family::Matern { .. } => "matern",
        }
    }
}

/// A stationary, isotropic covariance model C(h) with
/// C(0) = sill + nugget and C(h) = sill * correlation(h / range) for h > 0.
///
/// The nugget is the discontinuous micro-scale component at the origin;
/// the corresponding semivariogram is gamma(h) = nugget + sill -
/// C(h) for h > 0 and gamma(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    family: Family,
    sill: f64,
    range: f64,
    nugget: f64,
}

impl CovarianceModel {
    pub fn new(family: Family, sill: f64, range: f64, nugget: f64) -> Result<Self> {
        if !(sill > 0.0 && sill.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sill",
                message: format!("sill must be strictly positive, got {sill}"),
            });
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "range",
                message: format!("range must be strictly positive, got {range}"),
            });
        }
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "nugget",
                message: format!("nugget must be non-negative, got {nugget}"),
            });
        }
        if let Family::Matern { smoothness } = family {
            if !(smoothness > 0.0 && smoothness.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "smoothness",
                    message: format!(
                        "matern smoothness must be strictly positive, got {smoothness}"
                    ),
                });
            }
        }
        Ok(Self { family, sill, range, nugget })
    }

    pub fn exponential(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::new(Family::Exponential, sill, range, nugget)
    }

    pub fn gaussian(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::new(Family::Gaussian, sill, range, nugget)
    }

    pub fn spherical(sill: f64, range: f64, nugget: f64) -> Result<Self> {
        Self::new(Family::Spherical, sill, range, nugget)
    }

    pub fn matern(sill: f64, range: f64, nugget: f64, smoothness: f64) -> Result<Self> {
        Self::new(Family::Matern { smoothness }, sill, range, nugget)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn sill(&self) -> f64 {
        self.sill
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Total variance C(0) = sill + nugget.
    pub fn variance(&self) -> f64 {
        self.sill + self.nugget
    }

    /// Isotropic covariance at distance h >= 0.
    pub fn covariance_at(&self, h: f64) -> Result<f64> {
        if h < 0.0 || h.is_nan() {
            return Err(Error::NegativeDistance(h));
        }
        Ok(self.cov(h))
    }

    /// Semivariogram gamma(h) = C(0) - C(h); zero at the origin.
    pub fn semivariogram_at(&self, h: f64) -> Result<f64> {
        if h < 0.0 || h.is_nan() {
            return Err(Error::NegativeDistance(h));
        }
        if h == 0.0 {
            return Ok(0.0);
        }
        Ok(self.nugget + self.sill - self.cov(h))
    }

    /// Internal evaluation assuming h >= 0.
    pub(crate) fn cov(&self, h: f64) -> f64 {
        if h == 0.0 {
            self.sill + self.nugget
        } else {
            self.sill * self.family.correlation(h / self.range)
        }
    }

    /// Covariance between two locations.
    pub(crate) fn cov_between(&self, a: &Location, b: &Location) -> f64 {
        self.cov(a.distance(b))
    }
}

/// Builds the covariance (Gram) matrix of a model over a location set.
///
/// Diagonal entries are sill + nugget; the locations must be pairwise
/// distinct so the matrix is positive definite for the implemented
/// families.
pub fn gram_matrix(model: &CovarianceModel, locations: &[Location]) -> Result<DMatrix<f64>> {
    check_distinct(locations)?;
    let n = locations.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = model.variance();
        for j in (i + 1)..n {
            let c = model.cov_between(&locations[i], &locations[j]);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok(m)
}

/// One distance bin of an empirical semivariogram.
#[derive(Debug, Clone)]
pub struct VariogramBin {
    /// center of the distance bin
    pub lag: f64,
    /// number of location pairs falling in the bin
    pub count: usize,
    /// method-of-moments estimate; `None` where the bin is empty
    pub semivariance: Option<f64>,
}

/// Binned method-of-moments semivariogram estimates.
#[derive(Debug, Clone)]
pub struct EmpiricalVariogram {
    bins: Vec<VariogramBin>,
    max_lag: f64,
}

impl EmpiricalVariogram {
    /// Assembles a variogram from precomputed bins; lag centers must be
    /// strictly increasing.
    pub fn from_bins(bins: Vec<VariogramBin>, max_lag: f64) -> Result<Self> {
        if bins.windows(2).any(|w| w[0].lag >= w[1].lag) {
            return Err(Error::InvalidParameter {
                name: "bins",
                message: "lag centers must be strictly increasing".into(),
            });
        }
        if bins
            .iter()
            .any(|b| b.count > 0 && b.semivariance.is_none_or(|g| g < 0.0))
        {
            return Err(Error::InvalidParameter {
                name: "bins",
                message: "occupied bins need a non-negative semivariance".into(),
            });
        }
        Ok(Self { bins, max_lag })
    }

    pub fn bins(&self) -> &[VariogramBin] {
        &self.bins
    }

    pub fn max_lag(&self) -> f64 {
        self.max_lag
    }

    pub fn occupied(&self) -> impl Iterator<Item = &VariogramBin> {
        self.bins.iter().filter(|b| b.count > 0)
    }

    /// CSV form `lag,count,semivariance`; empty bins leave the last field
    /// blank.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("lag,count,semivariance\n");
        for b in &self.bins {
            match b.semivariance {
                Some(g) => out.push_str(&format!("{},{},{}\n", b.lag, b.count, g)),
                None => out.push_str(&format!("{},{},\n", b.lag, b.count)),
            }
        }
        out
    }
}

/// Method-of-moments (Matheron) semivariogram on equal-width distance bins.
///
/// Pairs are assigned by Euclidean distance; pairs beyond `max_lag` are
/// dropped. gamma_hat(h) = sum of squared increments / (2 * pair count).
pub fn empirical_variogram(
    dataset: &SpatialDataset,
    n_bins: usize,
    max_lag: f64,
) -> Result<EmpiricalVariogram> {
    if dataset.n() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: dataset.n() });
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter {
            name: "n_bins",
            message: "need at least one bin".into(),
        });
    }
    if !(max_lag > 0.0 && max_lag.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "max_lag",
            message: format!("max_lag must be positive, got {max_lag}"),
        });
    }

    let width = max_lag / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    let mut sums = vec![0.0f64; n_bins];
    let locs = dataset.locations();
    let vals = dataset.values();
    for i in 0..locs.len() {
        for j in (i + 1)..locs.len() {
            let d = locs[i].distance(&locs[j]);
            if d > max_lag {
                continue;
            }
            // half-open bins (k*w, (k+1)*w]; d > 0 since locations are distinct
            let k = ((d / width).ceil() as usize).saturating_sub(1).min(n_bins - 1);
            counts[k] += 1;
            sums[k] += (vals[i] - vals[j]).powi(2);
        }
    }
    let bins = (0..n_bins)
        .map(|k| VariogramBin {
            lag: (k as f64 + 0.5) * width,
            count: counts[k],
            semivariance: (counts[k] > 0).then(|| sums[k] / (2.0 * counts[k] as f64)),
        })
        .collect();
    Ok(EmpiricalVariogram { bins, max_lag })
}

/// Fits (sill, range, nugget) of the given family to an empirical
/// variogram by least squares weighted with the per-bin pair counts.
///
/// Positivity is kept by searching in log-parameter space with a
/// multi-start simplex.
pub fn fit_variogram(empirical: &EmpiricalVariogram, family: Family) -> Result<CovarianceModel> {
    let occupied: Vec<&VariogramBin> = empirical.occupied().collect();
    if occupied.len() < 3 {
        return Err(Error::TooFewBins(occupied.len()));
    }
    let lags: Vec<f64> = occupied.iter().map(|b| b.lag).collect();
    let gammas: Vec<f64> = occupied.iter().map(|b| b.semivariance.unwrap()).collect();
    let weights: Vec<f64> = occupied.iter().map(|b| b.count as f64).collect();

    let gamma_max = gammas.iter().cloned().fold(0.0f64, f64::max);
    if gamma_max <= 0.0 {
        return Err(Error::FitDiverged(
            "all semivariances are zero; sill is at its lower bound".into(),
        ));
    }
    let lag_max = *lags.last().unwrap();

    let fam = family.clone();
    let objective = move |theta: &[f64]| -> f64 {
        let (sill, range, nugget) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
        let model = match CovarianceModel::new(fam.clone(), sill, range, nugget) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        lags.iter()
            .zip(&gammas)
            .zip(&weights)
            .map(|((h, g), w)| {
                let gm = model.nugget + model.sill - model.cov(*h);
                w * (g - gm) * (g - gm)
            })
            .sum()
    };

    let starts: Vec<Vec<f64>> = [
        (gamma_max, 0.3 * lag_max, 1e-4 * gamma_max),
        (gamma_max, 1.0 * lag_max, 1e-4 * gamma_max),
        (0.7 * gamma_max, 0.1 * lag_max, 0.3 * gamma_max),
        (1.5 * gamma_max, 0.6 * lag_max, 1e-2 * gamma_max),
        (gamma_max, 0.05 * lag_max, 1e-3 * gamma_max),
    ]
    .iter()
    .map(|(s, r, n)| vec![s.ln(), r.ln(), n.ln()])
    .collect();

    let opts = SimplexOptions::default();
    let best = optim::multi_start(objective, &starts, &[0.7, 0.7, 2.0], &opts)
        .ok_or_else(|| Error::FitDiverged("no simplex start produced a finite objective".into()))?;
    if !best.fx.is_finite() {
        return Err(Error::FitDiverged("objective non-finite at optimum".into()));
    }
    CovarianceModel::new(family, best.x[0].exp(), best.x[1].exp(), best.x[2].exp())
}
