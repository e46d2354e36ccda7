//! Spatial-statistics engine: geostatistical kriging, lattice
//! (CAR / Gaussian-MRF) models, spatial point processes, conditional
//! multivariate cross-covariance construction, Vecchia-approximated
//! scalable prediction, and space-time Kalman filtering.
//!
//! The crate is organized around the three classical spatial process
//! types plus the machinery that connects them:
//!
//! - [`geom`], [`dataset`] — domains, windows, BAU tessellations, and
//!   point-referenced data.
//! - [`gaussian`] — exact dense Gaussian conditioning, the oracle every
//!   other predictor is checked against.
//! - [`covariance`], [`kriging`] — stationary covariance families,
//!   variogram estimation and fitting, simple/ordinary/universal kriging.
//! - [`lattice`] — neighborhood graphs, CAR models, exact and
//!   checkerboard-Gibbs sampling, lattice prediction.
//! - [`pointproc`] — Poisson and log-Gaussian Cox simulation,
//!   K-functions, and Monte Carlo CSR tests.
//! - [`multivariate`] — bivariate models built by conditioning, with
//!   cross-covariances derived by integration against an interaction
//!   kernel.
//! - [`vecchia`] — ordered nearest-neighbor sparsification of the
//!   Gaussian joint for scalable likelihoods and prediction.
//! - [`spacetime`] — separable space-time covariances and Kalman
//!   filtering/smoothing/forecasting on a discretized lattice.
//! - [`cli`] — the config-driven batch pipelines behind the `spatial`
//!   binary.
//!
//! Each major capability has a runnable demonstration under `examples/`.

pub mod cli;
pub mod covariance;
pub mod dataset;
pub mod error;
pub mod gaussian;
pub mod geom;
pub mod kriging;
pub mod lattice;
pub mod multivariate;
pub mod pointproc;
pub mod raster;
pub mod spacetime;
pub mod sparse;
pub mod vecchia;

mod linalg;
mod optim;
mod special;

pub use crate::covariance::{CovarianceModel, EmpiricalVariogram, Family};
pub use crate::dataset::SpatialDataset;
pub use crate::error::{Error, Result};
pub use crate::gaussian::GaussianSpec;
pub use crate::geom::{tessellate_baus, BauGrid, Location, Window};
pub use crate::kriging::{KrigingResult, PredictionMap, TrendSpec};
pub use crate::lattice::{CarModel, NeighborhoodGraph};
pub use crate::multivariate::{BivariateModel, CrossCovarianceSet, InteractionKernel};
pub use crate::pointproc::{IntensityFunction, PointPattern};
pub use crate::spacetime::{StateSpaceModel, StCovariance};
pub use crate::vecchia::{NeighborDag, Ordering, OrderingStrategy, VecchiaFactor};
