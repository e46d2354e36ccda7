//! Spatial point processes: homogeneous/inhomogeneous Poisson and
//! log-Gaussian Cox simulation, counting measures, K-function
//! estimation, and Monte Carlo tests of complete spatial randomness.

use std::fmt;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::covariance::{self, CovarianceModel};
use crate::error::{Error, Result};
use crate::geom::{BauGrid, Location, Window};
use crate::linalg;

/// A realization of a (possibly marked) point process on a bounded
/// window.
#[derive(Debug, Clone)]
pub struct PointPattern {
    window: Window,
    points: Vec<Location>,
    marks: Option<Vec<f64>>,
}

impl PointPattern {
    pub fn new(window: Window, points: Vec<Location>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !window.contains(p) {
                return Err(Error::InvalidParameter {
                    name: "points",
                    message: format!("point {i} lies outside the window"),
                });
            }
        }
        Ok(Self { window, points, marks: None })
    }

    /// Attaches one mark per point.
    pub fn with_marks(mut self, marks: Vec<f64>) -> Result<Self> {
        if marks.len() != self.points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} marks for {} points",
                marks.len(),
                self.points.len()
            )));
        }
        self.marks = Some(marks);
        Ok(self)
    }

    /// Drops the marks, returning the bare pattern.
    pub fn strip_marks(mut self) -> Self {
        self.marks = None;
        self
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[Location] {
        &self.points
    }

    pub fn marks(&self) -> Option<&[f64]> {
        self.marks.as_deref()
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Number of points falling in a closed query region contained in
    /// the window; boundary points count as inside.
    pub fn count(&self, region: &Window) -> Result<usize> {
        if !self.window.contains_window(region) {
            return Err(Error::RegionOutsideWindow);
        }
        Ok(self.points.iter().filter(|p| region.contains(p)).count())
    }

    /// Pattern CSV `x,y[,mark]` preceded by a window header line.
    pub fn to_csv_string(&self) -> String {
        let (lo, hi) = self.window.bbox();
        let mut out = format!("# window: {} {} {} {}\n", lo[0], lo[1], hi[0], hi[1]);
        out.push_str(if self.marks.is_some() { "x,y,mark\n" } else { "x,y\n" });
        for (i, p) in self.points.iter().enumerate() {
            match &self.marks {
                Some(m) => out.push_str(&format!("{},{},{}\n", p.coord(0), p.coord(1), m[i])),
                None => out.push_str(&format!("{},{}\n", p.coord(0), p.coord(1))),
            }
        }
        out
    }

    /// Parses the pattern CSV format (rectangular windows).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty pattern CSV".into()))?;
        let window = header
            .strip_prefix("# window:")
            .map(|rest| {
                let nums: Vec<f64> = rest
                    .split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect();
                if nums.len() != 4 {
                    return Err(Error::Parse("window header needs 4 numbers".into()));
                }
                Window::rect(vec![nums[0], nums[1]], vec![nums[2], nums[3]])
            })
            .ok_or_else(|| Error::Parse("missing `# window:` header line".into()))??;
        let cols = lines
            .next()
            .ok_or_else(|| Error::Parse("missing column header".into()))?;
        let has_marks = match cols.trim() {
            "x,y" => false,
            "x,y,mark" => true,
            other => return Err(Error::Parse(format!("unexpected columns `{other}`"))),
        };
        let mut points = Vec::new();
        let mut marks = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let want = if has_marks { 3 } else { 2 };
            if fields.len() != want {
                return Err(Error::Parse(format!("row {}: wrong field count", lineno + 3)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number `{s}`", lineno + 3)))
            };
            points.push(Location::xy(parse(fields[0])?, parse(fields[1])?));
            if has_marks {
                marks.push(parse(fields[2])?);
            }
        }
        let pattern = Self::new(window, points)?;
        if has_marks {
            pattern.with_marks(marks)
        } else {
            Ok(pattern)
        }
    }
}

/// An intensity surface lambda(s) >= 0 with a known finite upper bound.
pub struct IntensityFunction {
    kind: IntensityKind,
    lambda_max: f64,
}

enum IntensityKind {
    Constant(f64),
    /// piecewise constant per BAU cell
    Grid { grid: BauGrid, values: Vec<f64> },
    Callable(Box<dyn Fn(&Location) -> f64 + Send + Sync>),
}

impl fmt::Debug for IntensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            IntensityKind::Constant(l) => format!("Constant({l})"),
            IntensityKind::Grid { values, .. } => format!("Grid({} cells)", values.len()),
            IntensityKind::Callable(_) => "Callable".to_string(),
        };
        write!(f, "IntensityFunction {{ kind: {kind}, max: {} }}", self.lambda_max)
    }
}

impl IntensityFunction {
    pub fn constant(lambda: f64) -> Result<Self> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::NegativeIntensity(lambda));
        }
        Ok(Self { kind: IntensityKind::Constant(lambda), lambda_max: lambda })
    }

    /// Piecewise-constant intensity over BAU cells.
    pub fn from_grid(grid: BauGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} intensity values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(&bad) = values.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(Error::NegativeIntensity(bad));
        }
        let lambda_max = values.iter().cloned().fold(0.0, f64::max);
        Ok(Self { kind: IntensityKind::Grid { grid, values }, lambda_max })
    }

    /// Arbitrary intensity function with a caller-supplied upper bound.
    pub fn from_fn(
        f: impl Fn(&Location) -> f64 + Send + Sync + 'static,
        lambda_max: f64,
    ) -> Result<Self> {
        if !lambda_max.is_finite() || lambda_max < 0.0 {
            return Err(Error::UnboundedIntensity(format!(
                "upper bound must be finite and non-negative, got {lambda_max}"
            )));
        }
        Ok(Self { kind: IntensityKind::Callable(Box::new(f)), lambda_max })
    }

    pub fn max(&self) -> f64 {
        self.lambda_max
    }

    /// lambda(s); outside a grid's cells (clipped-away corners) the
    /// intensity is zero.
    pub fn eval(&self, s: &Location) -> f64 {
        match &self.kind {
            IntensityKind::Constant(l) => *l,
            IntensityKind::Grid { grid, values } => {
                grid.cell_containing(s).map_or(0.0, |i| values[i])
            }
            IntensityKind::Callable(f) => f(s),
        }
    }
}

/// Draws one point uniformly on the window (rejection from the bounding
/// box for polygons).
fn uniform_point(window: &Window, rng: &mut ChaCha8Rng) -> Location {
    let (lo, hi) = window.bbox();
    loop {
        let coords: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| rng.random_range(*a..*b))
            .collect();
        let p = Location::new(coords).expect("finite bounds");
        if window.contains(&p) {
            return p;
        }
    }
}

fn poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    draw as usize
}

/// Homogeneous Poisson process: N ~ Poisson(lambda |D|), then N points
/// i.i.d. uniform on the window. Deterministic given the seed.
pub fn simulate_homogeneous_poisson(
    window: &Window,
    lambda: f64,
    seed: u64,
) -> Result<PointPattern> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::NegativeIntensity(lambda));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = poisson_count(lambda * window.volume(), &mut rng);
    let points = (0..n).map(|_| uniform_point(window, &mut rng)).collect();
    PointPattern::new(window.clone(), points)
}

/// Inhomogeneous Poisson process by thinning: simulate a dominating
/// homogeneous process at the intensity bound and keep each point with
/// probability lambda(s) / bound.
pub fn simulate_inhomogeneous_poisson(
    window: &Window,
    intensity: &IntensityFunction,
    seed: u64,
) -> Result<PointPattern> {
    let bound = intensity.max();
    if !bound.is_finite() {
        return Err(Error::UnboundedIntensity("intensity bound is not finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = poisson_count(bound * window.volume(), &mut rng);
    let mut points = Vec::new();
    for _ in 0..n {
        let p = uniform_point(window, &mut rng);
        let lam = intensity.eval(&p);
        if lam < 0.0 {
            return Err(Error::NegativeIntensity(lam));
        }
        if lam > bound * (1.0 + 1e-12) {
            return Err(Error::UnboundedIntensity(format!(
                "intensity {lam} exceeds its stated bound {bound}"
            )));
        }
        let u: f64 = rng.random_range(0.0..1.0);
        if u * bound <= lam {
            points.push(p);
        }
    }
    PointPattern::new(window.clone(), points)
}

/// Log-Gaussian Cox process on a BAU discretization: the log intensity
/// is drawn from a Gaussian process at the cell centroids (dense
/// Cholesky), treated as constant within each cell; counts are Poisson
/// per cell with uniform placement inside the cell.
///
/// Returns the pattern and the realized log-intensity field, one value
/// per cell.
pub fn simulate_lgcp(
    window: &Window,
    grid: &BauGrid,
    gp_mean: f64,
    gp_model: &CovarianceModel,
    seed: u64,
) -> Result<(PointPattern, Vec<f64>)> {
    let (wlo, whi) = window.bbox();
    let (glo, ghi) = grid.window().bbox();
    let same = wlo
        .iter()
        .zip(&glo)
        .chain(whi.iter().zip(&ghi))
        .all(|(a, b)| (a - b).abs() <= 1e-12);
    if !same || window.dim() != grid.window().dim() {
        return Err(Error::DimensionMismatch(
            "intensity grid does not cover the simulation window".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids = grid.centroids();
    let gram = covariance::gram_matrix(gp_model, &centroids)?;
    let chol = linalg::cholesky_with_jitter(&gram)?;
    let z = DVector::from_fn(centroids.len(), |_, _| StandardNormal.sample(&mut rng));
    let log_field: DVector<f64> = chol.l() * z + DVector::from_element(centroids.len(), gp_mean);

    let mut points = Vec::new();
    for (j, cell) in grid.cells().iter().enumerate() {
        let lam = log_field[j].exp();
        let n = poisson_count(lam * cell.volume, &mut rng);
        for _ in 0..n {
            // uniform inside the (possibly clipped) cell
            loop {
                let coords: Vec<f64> = cell
                    .lo
                    .iter()
                    .zip(&cell.hi)
                    .map(|(a, b)| rng.random_range(*a..*b))
                    .collect();
                let p = Location::new(coords)?;
                if window.contains(&p) {
                    points.push(p);
                    break;
                }
            }
        }
    }
    Ok((PointPattern::new(window.clone(), points)?, log_field.iter().copied().collect()))
}

/// Border distance of a point: distance to the window boundary.
fn border_distance(window: &Window, p: &Location) -> f64 {
    match window {
        Window::Rect { lo, hi } => p
            .coords()
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (a, b))| (c - a).min(b - c))
            .fold(f64::INFINITY, f64::min),
        Window::Polygon { vertices } => {
            let n = vertices.len();
            let (x, y) = (p.coord(0), p.coord(1));
            (0..n)
                .map(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    // distance from p to segment ab
                    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                    let len2 = dx * dx + dy * dy;
                    let t = (((x - a[0]) * dx + (y - a[1]) * dy) / len2).clamp(0.0, 1.0);
                    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
                    ((x - qx).powi(2) + (y - qy).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Method-of-moments K-function estimate at the given radii.
///
/// Rectangular windows use the translation edge-correction, polygon
/// windows the border (reduced-sample) correction. The largest radius
/// must stay within a quarter of the window's shorter side.
pub fn estimate_k_function(pattern: &PointPattern, radii: &[f64]) -> Result<Vec<f64>> {
    let n = pattern.n();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if radii.is_empty()
        || radii.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || radii.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidParameter {
            name: "radii",
            message: "radii must be positive, finite, and strictly increasing".into(),
        });
    }
    let (lo, hi) = pattern.window().bbox();
    let shorter = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let r_max = *radii.last().unwrap();
    if r_max > shorter / 4.0 {
        return Err(Error::RadiusTooLarge { radius: r_max, limit: shorter / 4.0 });
    }

    let area = pattern.window().volume();
    let pts = pattern.points();
    let nf = n as f64;
    let mut k = vec![0.0f64; radii.len()];
    match pattern.window() {
        Window::Rect { lo, hi } => {
            let (a, b) = (hi[0] - lo[0], hi[1] - lo[1]);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = pts[i].distance(&pts[j]);
                    if d > r_max {
                        continue;
                    }
                    let dx = (pts[i].coord(0) - pts[j].coord(0)).abs();
                    let dy = (pts[i].coord(1) - pts[j].coord(1)).abs();
                    // translation correction: the shifted window overlap
                    let weight = 1.0 / ((a - dx) * (b - dy));
                    for (kk, &r) in radii.iter().enumerate() {
                        if d <= r {
                            k[kk] += weight;
                        }
                    }
                }
            }
            for kk in k.iter_mut() {
                *kk *= area * area / (nf * nf);
            }
        }
        Window::Polygon { .. } => {
            // border correction: only points at least r from the boundary
            let borders: Vec<f64> = pts.iter().map(|p| border_distance(pattern.window(), p)).collect();
            let lambda_hat = nf / area;
            for (kk, &r) in radii.iter().enumerate() {
                let eligible: Vec<usize> = (0..n).filter(|&i| borders[i] >= r).collect();
                if eligible.is_empty() {
                    k[kk] = f64::NAN;
                    continue;
                }
                let mut total = 0usize;
                for &i in &eligible {
                    total += (0..n)
                        .filter(|&j| j != i && pts[i].distance(&pts[j]) <= r)
                        .count();
                }
                k[kk] = total as f64 / (lambda_hat * eligible.len() as f64);
            }
        }
    }
    Ok(k)
}

/// Test statistic used by [`csr_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsrStatistic {
    /// sup-distance between the K estimate and the CSR benchmark pi r^2
    KDeviation,
    /// chi-squared quadrat-count statistic
    QuadratChi2,
}

/// Outcome of a Monte Carlo CSR test.
#[derive(Debug, Clone)]
pub struct CsrTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_sim: usize,
    pub seed: u64,
    pub kind: CsrStatistic,
}

impl CsrTestResult {
    /// Plain-text report.
    pub fn report(&self) -> String {
        format!(
            "CSR test ({})\nstatistic = {}\np-value = {}\nn_sim = {}\nseed = {}\n",
            match self.kind {
                CsrStatistic::KDeviation => "K-deviation",
                CsrStatistic::QuadratChi2 => "quadrat-chi2",
            },
            self.statistic,
            self.p_value,
            self.n_sim,
            self.seed
        )
    }
}

fn csr_statistic(pattern: &PointPattern, kind: CsrStatistic) -> Result<f64> {
    match kind {
        CsrStatistic::KDeviation => {
            let (lo, hi) = pattern.window().bbox();
            let shorter = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
            let radii: Vec<f64> = (1..=10).map(|k| shorter / 4.0 * k as f64 / 10.0).collect();
            let k = estimate_k_function(pattern, &radii)?;
            Ok(radii
                .iter()
                .zip(&k)
                .map(|(r, kh)| (kh - std::f64::consts::PI * r * r).abs())
                .fold(0.0, f64::max))
        }
        CsrStatistic::QuadratChi2 => {
            let n = pattern.n();
            let q = (((n as f64) / 5.0).sqrt().floor() as usize).clamp(2, 6);
            let grid = crate::geom::tessellate_baus(pattern.window(), &[q, q])?;
            let area = pattern.window().volume();
            let mut counts = vec![0usize; grid.n_cells()];
            for p in pattern.points() {
                if let Some(c) = grid.cell_containing(p) {
                    counts[c] += 1;
                }
            }
            let mut chi2 = 0.0;
            for (c, cell) in grid.cells().iter().enumerate() {
                let expected = n as f64 * cell.volume / area;
                if expected > 0.0 {
                    chi2 += (counts[c] as f64 - expected).powi(2) / expected;
                }
            }
            Ok(chi2)
        }
    }
}

/// Monte Carlo test of complete spatial randomness.
///
/// Simulations condition on the observed count (a binomial process),
/// removing the unknown intensity from the null distribution. The
/// p-value is (1 + #{simulated >= observed}) / (n_sim + 1).
pub fn csr_test(
    pattern: &PointPattern,
    n_sim: usize,
    seed: u64,
    statistic: CsrStatistic,
) -> Result<CsrTestResult> {
    if pattern.n() < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: pattern.n() });
    }
    if n_sim < 39 {
        return Err(Error::TooFewSimulations { needed: 39, got: n_sim });
    }
    let observed = csr_statistic(pattern, statistic)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    for _ in 0..n_sim {
        let points: Vec<Location> =
            (0..pattern.n()).map(|_| uniform_point(pattern.window(), &mut rng)).collect();
        let sim = PointPattern::new(pattern.window().clone(), points)?;
        if csr_statistic(&sim, statistic)? >= observed {
            at_least += 1;
        }
    }
    Ok(CsrTestResult {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (n_sim + 1) as f64,
        n_sim,
        seed,
        kind: statistic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_intensity_gives_empty_pattern() {
        let p = simulate_homogeneous_poisson(&Window::unit_square(), 0.0, 1).unwrap();
        assert_eq!(p.n(), 0);
        assert!(matches!(
            simulate_homogeneous_poisson(&Window::unit_square(), -1.0, 1),
            Err(Error::NegativeIntensity(_))
        ));
    }

    #[test]
    fn homogeneous_counts_have_poisson_moments() {
        // moment identities at 3-sigma scale over 2000 replicates
        let reps = 2000;
        let lambda = 50.0;
        let mut counts = Vec::with_capacity(reps);
        for seed in 0..reps {
            let p = simulate_homogeneous_poisson(&Window::unit_square(), lambda, seed as u64).unwrap();
            counts.push(p.n() as f64);
        }
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (reps - 1) as f64;
        let se3 = 3.0 * (lambda / reps as f64).sqrt();
        assert!((mean - lambda).abs() < se3, "mean {mean}");
        assert!(var / mean > 0.9 && var / mean < 1.1, "var/mean {}", var / mean);
    }

    #[test]
    fn determinism_given_seed() {
        let a = simulate_homogeneous_poisson(&Window::unit_square(), 50.0, 7).unwrap();
        let b = simulate_homogeneous_poisson(&Window::unit_square(), 50.0, 7).unwrap();
        assert_eq!(a.points(), b.points());
    }

    #[test]
    fn thinning_with_constant_intensity_matches_homogeneous_mean() {
        let window = Window::unit_square();
        let intensity = IntensityFunction::constant(40.0).unwrap();
        let reps = 1500;
        let mut total = 0usize;
        for seed in 0..reps {
            total += simulate_inhomogeneous_poisson(&window, &intensity, seed as u64)
                .unwrap()
                .n();
        }
        let mean = total as f64 / reps as f64;
        let se3 = 3.0 * (40.0f64 / reps as f64).sqrt();
        assert!((mean - 40.0).abs() < se3, "mean {mean}");
    }

    #[test]
    fn linear_intensity_splits_mass() {
        // lambda(s) = 100 x: left half expects 12.5, right half 37.5
        let window = Window::unit_square();
        let intensity = IntensityFunction::from_fn(|s| 100.0 * s.coord(0), 100.0).unwrap();
        let reps = 2000;
        let (mut left, mut right) = (0usize, 0usize);
        let left_half = Window::rect(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        for seed in 0..reps {
            let p = simulate_inhomogeneous_poisson(&window, &intensity, seed as u64).unwrap();
            let l = p.count(&left_half).unwrap();
            left += l;
            right += p.n() - l;
        }
        let (ml, mr) = (left as f64 / reps as f64, right as f64 / reps as f64);
        let se3l = 3.0 * (12.5f64 / reps as f64).sqrt();
        let se3r = 3.0 * (37.5f64 / reps as f64).sqrt();
        assert!((ml - 12.5).abs() < se3l, "left mean {ml}");
        assert!((mr - 37.5).abs() < se3r, "right mean {mr}");
    }

    #[test]
    fn zero_intensity_function_gives_empty() {
        let intensity = IntensityFunction::constant(0.0).unwrap();
        let p = simulate_inhomogeneous_poisson(&Window::unit_square(), &intensity, 3).unwrap();
        assert_eq!(p.n(), 0);
    }

    #[test]
    fn lgcp_degenerate_gp_is_homogeneous() {
        // vanishing GP variance: mean count = |D| exp(m)
        let window = Window::unit_square();
        let grid = crate::geom::tessellate_baus(&window, &[5, 5]).unwrap();
        let model = CovarianceModel::exponential(1e-12, 0.3, 0.0).unwrap();
        let m = 50.0f64.ln();
        let reps = 1000;
        let mut total = 0usize;
        for seed in 0..reps {
            let (p, field) = simulate_lgcp(&window, &grid, m, &model, seed as u64).unwrap();
            assert_eq!(field.len(), grid.n_cells());
            total += p.n();
        }
        let mean = total as f64 / reps as f64;
        let se3 = 3.0 * (50.0f64 / reps as f64).sqrt() + 0.1;
        assert!((mean - 50.0).abs() < se3, "mean {mean}");
    }

    #[test]
    fn lgcp_lognormal_mean_identity() {
        // E[N] = |D| exp(m + s^2/2) for sill s^2 (checked loosely here;
        // the acceptance suite runs the full-replicate version)
        let window = Window::unit_square();
        let grid = crate::geom::tessellate_baus(&window, &[10, 10]).unwrap();
        let sigma2 = 0.5;
        let model = CovarianceModel::exponential(sigma2, 0.2, 0.0).unwrap();
        let m = 30.0f64.ln() - sigma2 / 2.0;
        let reps = 1200;
        let mut total = 0usize;
        for seed in 0..reps {
            total += simulate_lgcp(&window, &grid, m, &model, seed as u64).unwrap().0.n();
        }
        let mean = total as f64 / reps as f64;
        // overdispersed relative to Poisson; allow a wide 3-sigma band
        assert!((mean - 30.0).abs() < 2.0, "mean {mean}");
    }

    #[test]
    fn count_region_semantics() {
        let window = Window::unit_square();
        let p = PointPattern::new(
            window,
            vec![Location::xy(0.25, 0.25), Location::xy(0.75, 0.75)],
        )
        .unwrap();
        let region = Window::rect(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(p.count(&region).unwrap(), 1);
        assert_eq!(p.count(p.window()).unwrap(), 2);
        let empty = PointPattern::new(Window::unit_square(), vec![]).unwrap();
        assert_eq!(empty.count(&region).unwrap(), 0);
        let outside = Window::rect(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap();
        assert!(matches!(p.count(&outside), Err(Error::RegionOutsideWindow)));
    }

    #[test]
    fn boundary_points_count_inside() {
        let p = PointPattern::new(Window::unit_square(), vec![Location::xy(0.5, 0.5)]).unwrap();
        let region = Window::rect(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(p.count(&region).unwrap(), 1);
    }

    #[test]
    fn k_function_two_points() {
        let p = PointPattern::new(
            Window::unit_square(),
            vec![Location::xy(0.45, 0.5), Location::xy(0.55, 0.5)],
        )
        .unwrap();
        let k = estimate_k_function(&p, &[0.05, 0.2]).unwrap();
        assert_eq!(k[0], 0.0);
        assert!(k[1] > 0.0);
    }

    #[test]
    fn k_function_preconditions() {
        let p = PointPattern::new(Window::unit_square(), vec![Location::xy(0.5, 0.5)]).unwrap();
        assert!(matches!(
            estimate_k_function(&p, &[0.1]),
            Err(Error::TooFewPoints { .. })
        ));
        let p2 = PointPattern::new(
            Window::unit_square(),
            vec![Location::xy(0.4, 0.5), Location::xy(0.6, 0.5)],
        )
        .unwrap();
        assert!(matches!(
            estimate_k_function(&p2, &[0.3]),
            Err(Error::RadiusTooLarge { .. })
        ));
        assert!(estimate_k_function(&p2, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn k_function_nondecreasing() {
        let p = simulate_homogeneous_poisson(&Window::unit_square(), 120.0, 5).unwrap();
        let radii: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64 / 8.0).collect();
        let k = estimate_k_function(&p, &radii).unwrap();
        for w in k.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn k_function_csr_benchmark_small() {
        // mean K(r) near pi r^2 under CSR (reduced-replicate version)
        let radii = [0.05, 0.1];
        let reps = 150;
        let mut sums = [0.0f64; 2];
        let mut used = 0;
        for seed in 0..reps {
            let p = simulate_homogeneous_poisson(&Window::unit_square(), 100.0, 40_000 + seed).unwrap();
            if p.n() < 2 {
                continue;
            }
            let k = estimate_k_function(&p, &radii).unwrap();
            sums[0] += k[0];
            sums[1] += k[1];
            used += 1;
        }
        for (i, &r) in radii.iter().enumerate() {
            let mean = sums[i] / used as f64;
            let want = std::f64::consts::PI * r * r;
            assert!((mean - want).abs() < 0.10 * want, "r={r}: {mean} vs {want}");
        }
    }

    #[test]
    fn csr_test_preconditions() {
        let p = simulate_homogeneous_poisson(&Window::unit_square(), 50.0, 2).unwrap();
        assert!(matches!(
            csr_test(&p, 19, 1, CsrStatistic::KDeviation),
            Err(Error::TooFewSimulations { needed: 39, got: 19 })
        ));
        let few = PointPattern::new(
            Window::unit_square(),
            vec![
                Location::xy(0.1, 0.1),
                Location::xy(0.2, 0.2),
                Location::xy(0.3, 0.3),
                Location::xy(0.4, 0.4),
            ],
        )
        .unwrap();
        assert!(matches!(
            csr_test(&few, 99, 1, CsrStatistic::KDeviation),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn csr_test_is_deterministic_and_reports() {
        let p = simulate_homogeneous_poisson(&Window::unit_square(), 60.0, 11).unwrap();
        let a = csr_test(&p, 39, 5, CsrStatistic::QuadratChi2).unwrap();
        let b = csr_test(&p, 39, 5, CsrStatistic::QuadratChi2).unwrap();
        assert_eq!(a.statistic, b.statistic);
        assert_eq!(a.p_value, b.p_value);
        let report = a.report();
        assert!(report.contains("p-value"));
        assert!(report.contains("seed = 5"));
    }

    #[test]
    fn clustered_pattern_rejected_by_k_test() {
        // strongly clustered LGCP should be detected
        let window = Window::unit_square();
        let grid = crate::geom::tessellate_baus(&window, &[10, 10]).unwrap();
        let model = CovarianceModel::exponential(2.0, 0.1, 0.0).unwrap();
        let m = 60.0f64.ln() - 1.0;
        let (p, _) = simulate_lgcp(&window, &grid, m, &model, 4).unwrap();
        let r = csr_test(&p, 99, 17, CsrStatistic::KDeviation).unwrap();
        assert!(r.p_value <= 0.05, "p = {}", r.p_value);
    }

    #[test]
    fn disjoint_region_counts_uncorrelated() {
        // sample correlation of N(A1), N(A2) for disjoint regions
        let a1 = Window::rect(vec![0.0, 0.0], vec![0.4, 0.4]).unwrap();
        let a2 = Window::rect(vec![0.6, 0.6], vec![1.0, 1.0]).unwrap();
        let reps = 3000;
        let mut n1 = Vec::with_capacity(reps);
        let mut n2 = Vec::with_capacity(reps);
        for seed in 0..reps {
            let p =
                simulate_homogeneous_poisson(&Window::unit_square(), 30.0, 90_000 + seed as u64)
                    .unwrap();
            n1.push(p.count(&a1).unwrap() as f64);
            n2.push(p.count(&a2).unwrap() as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (m1, m2) = (mean(&n1), mean(&n2));
        let cov: f64 = n1.iter().zip(&n2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>()
            / (reps - 1) as f64;
        let sd1 = (n1.iter().map(|a| (a - m1) * (a - m1)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let sd2 = (n2.iter().map(|a| (a - m2) * (a - m2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let corr = cov / (sd1 * sd2);
        assert!(corr.abs() < 0.05, "corr {corr}");
    }

    #[test]
    fn superposition_adds_intensities() {
        // union of independent patterns behaves like the summed intensity
        let reps = 1500;
        let mut total = 0usize;
        for seed in 0..reps {
            let a = simulate_homogeneous_poisson(&Window::unit_square(), 20.0, seed).unwrap();
            let b =
                simulate_homogeneous_poisson(&Window::unit_square(), 35.0, 10_000_000 + seed).unwrap();
            total += a.n() + b.n();
        }
        let mean = total as f64 / reps as f64;
        let se3 = 3.0 * (55.0f64 / reps as f64).sqrt();
        assert!((mean - 55.0).abs() < se3, "mean {mean}");
    }

    #[test]
    fn marked_pattern_roundtrip() {
        let p = simulate_homogeneous_poisson(&Window::unit_square(), 20.0, 3).unwrap();
        let marks: Vec<f64> = (0..p.n()).map(|i| i as f64 * 0.5).collect();
        let original = p.clone();
        let marked = p.with_marks(marks.clone()).unwrap();
        assert_eq!(marked.marks().unwrap(), marks.as_slice());
        let stripped = marked.strip_marks();
        assert_eq!(stripped.points(), original.points());
        assert!(stripped.marks().is_none());
    }

    #[test]
    fn pattern_csv_roundtrip() {
        let p = simulate_homogeneous_poisson(&Window::unit_square(), 15.0, 8).unwrap();
        let marks: Vec<f64> = (0..p.n()).map(|i| (i as f64).sqrt()).collect();
        let marked = p.with_marks(marks).unwrap();
        let text = marked.to_csv_string();
        assert!(text.starts_with("# window: 0 0 1 1\n"));
        let back = PointPattern::from_csv_str(&text).unwrap();
        assert_eq!(back.n(), marked.n());
        assert_eq!(back.marks().unwrap().len(), marked.n());
    }

    #[test]
    fn points_outside_window_rejected() {
        let e = PointPattern::new(Window::unit_square(), vec![Location::xy(1.5, 0.5)]);
        assert!(e.is_err());
    }
}
