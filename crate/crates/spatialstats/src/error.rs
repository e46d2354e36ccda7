//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("duplicate locations at indices {0} and {1}")]
    DuplicateLocation(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("grid resolution must be at least 1 per axis")]
    ZeroResolution,
    #[error("grid size must be at least 1 per axis")]
    ZeroSize,
    #[error("observed covariance block (plus noise) is not invertible")]
    SingularCovariance,
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("variogram fit needs at least 3 occupied bins, got {0}")]
    TooFewBins(usize),
    #[error("fit diverged: {0}")]
    FitDiverged(String),
    #[error("too few observations: n = {n} but trend has {p} coefficients")]
    TooFewObservations { n: usize, p: usize },
    #[error("kriging system is singular")]
    SingularSystem,
    #[error("trend covariate matrix is rank deficient")]
    RankDeficientTrend,
    #[error("precision matrix is asymmetric: rows {0} and {1} disagree")]
    AsymmetricPrecision(usize, usize),
    #[error("matrix is not positive definite{0}")]
    NotPositiveDefinite(String),
    #[error("graph is not bipartite: odd cycle through nodes {0:?}")]
    NotBipartite(Vec<usize>),
    #[error("intensity must be non-negative, got {0}")]
    NegativeIntensity(f64),
    #[error("intensity is unbounded or exceeds its stated maximum: {0}")]
    UnboundedIntensity(String),
    #[error("query region is not contained in the pattern window")]
    RegionOutsideWindow,
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("largest radius {radius} exceeds a quarter of the window's shorter side ({limit})")]
    RadiusTooLarge { radius: f64, limit: f64 },
    #[error("need at least {needed} Monte Carlo simulations, got {got}")]
    TooFewSimulations { needed: usize, got: usize },
    #[error("integration grid too coarse: need at least 4 cells per axis")]
    GridTooCoarse,
    #[error("neighbor covariance block is singular at ordered node {0}")]
    SingularNeighborBlock(usize),
    #[error("innovation covariance is not positive definite at time step {0}")]
    NonPositiveInnovationCovariance(usize),
    #[error("prediction map has no cells")]
    EmptyMap,
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
