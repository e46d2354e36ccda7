//! Space-time modeling on a discretized spatial lattice: separable
//! descriptive covariances and the dynamical (Markov) model with Kalman
//! filtering, smoothing, and forecasting.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::lattice::NeighborhoodGraph;
use crate::linalg;

/// Separable space-time covariance: the product of a spatial covariance
/// in the distance |s - u| and a temporal one in the lag |t - v|.
#[derive(Debug, Clone)]
pub struct StCovariance {
    spatial: CovarianceModel,
    temporal: CovarianceModel,
}

impl StCovariance {
    pub fn new(spatial: CovarianceModel, temporal: CovarianceModel) -> Self {
        Self { spatial, temporal }
    }

    pub fn spatial(&self) -> &CovarianceModel {
        &self.spatial
    }

    pub fn temporal(&self) -> &CovarianceModel {
        &self.temporal
    }

    /// cov(Y(s;t), Y(u;v)) = C_s(|s-u|) * C_t(|t-v|).
    pub fn at(
        &self,
        s: &crate::geom::Location,
        t: f64,
        u: &crate::geom::Location,
        v: f64,
    ) -> f64 {
        self.spatial.cov(s.distance(u)) * self.temporal.cov((t - v).abs())
    }
}

/// Linear-Gaussian dynamical model on m lattice nodes:
/// Y_t = M Y_{t-1} + eta_t with eta_t ~ Gau(0, Q), observed through
/// node selections with per-node measurement variances.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    /// per-node observation noise variance (diagonal R)
    obs_noise: DVector<f64>,
    initial: GaussianSpec,
}

impl StateSpaceModel {
    pub fn new(
        transition: DMatrix<f64>,
        process_noise: DMatrix<f64>,
        obs_noise: DVector<f64>,
        initial: GaussianSpec,
    ) -> Result<Self> {
        let m = transition.nrows();
        if transition.ncols() != m {
            return Err(Error::DimensionMismatch("transition matrix must be square".into()));
        }
        if process_noise.nrows() != m || process_noise.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "process noise is {}x{} but the state dimension is {m}",
                process_noise.nrows(),
                process_noise.ncols()
            )));
        }
        if obs_noise.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} observation variances for state dimension {m}",
                obs_noise.len()
            )));
        }
        if initial.dim() != m {
            return Err(Error::DimensionMismatch(format!(
                "initial distribution has dimension {} but the state has {m}",
                initial.dim()
            )));
        }
        let scale = process_noise.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        if linalg::max_asymmetry(&process_noise) > 1e-10 * scale {
            return Err(Error::InvalidParameter {
                name: "process_noise",
                message: "process noise covariance must be symmetric".into(),
            });
        }
        if obs_noise.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "obs_noise",
                message: "observation noise variances must be non-negative".into(),
            });
        }
        Ok(Self { transition, process_noise, obs_noise, initial })
    }

    /// Transition helper on a lattice: alpha * (row-normalized adjacency)
    /// + delta * I. Rows without neighbors get only the delta term.
    pub fn transition_from_graph(graph: &NeighborhoodGraph, alpha: f64, delta: f64) -> DMatrix<f64> {
        let m = graph.n();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = delta;
            let total: f64 = graph.neighbors(i).iter().map(|&(_, w)| w).sum();
            if total > 0.0 {
                for &(j, w) in graph.neighbors(i) {
                    t[(i, j)] += alpha * w / total;
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn obs_noise(&self) -> &DVector<f64> {
        &self.obs_noise
    }

    pub fn initial(&self) -> &GaussianSpec {
        &self.initial
    }

    /// Symmetric PSD square root via eigendecomposition (negative
    /// eigenvalues from rounding are clipped at zero). Handles Q = 0.
    fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = m.clone().symmetric_eigen();
        let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
    }
}

/// Per-time-step observations: (node index, measured value) pairs. An
/// empty step means no data arrived at that time.
#[derive(Debug, Clone, Default)]
pub struct Observations {
    pub steps: Vec<Vec<(usize, f64)>>,
}

impl Observations {
    pub fn k(&self) -> usize {
        self.steps.len()
    }

    /// CSV form `t,node_index,value` with 1-based time steps.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,node_index,value\n");
        for (t, step) in self.steps.iter().enumerate() {
            for &(node, value) in step {
                out.push_str(&format!("{},{},{}\n", t + 1, node, value));
            }
        }
        out
    }

    /// Parses `t,node_index,value`; rows may arrive in any order, the
    /// number of steps is the largest t seen.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty observations CSV".into()))?;
        if header.trim() != "t,node_index,value" {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        let mut k = 0usize;
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("row {}: wrong field count", lineno + 2)));
            }
            let t: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad time `{}`", lineno + 2, fields[0])))?;
            let node: usize = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad node `{}`", lineno + 2, fields[1])))?;
            let value: f64 = fields[2]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad value `{}`", lineno + 2, fields[2])))?;
            if t == 0 {
                return Err(Error::Parse(format!("row {}: time steps are 1-based", lineno + 2)));
            }
            k = k.max(t);
            rows.push((t, node, value));
        }
        let mut steps = vec![Vec::new(); k];
        for (t, node, value) in rows {
            steps[t - 1].push((node, value));
        }
        Ok(Self { steps })
    }
}

/// Filtered and one-step-forecast moments per time, plus the innovations
/// log-likelihood of the observation sequence.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    /// predictive moments of Y_t given data up to t-1
    pub forecast_means: Vec<DVector<f64>>,
    pub forecast_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
}

/// Smoothed moments per time, conditioning every state on all data.
#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

/// Simulates the dynamical model for k steps with every node observed;
/// returns the latent states and the noisy observations. Deterministic
/// given the seed.
pub fn simulate(model: &StateSpaceModel, k: usize, seed: u64) -> (Vec<DVector<f64>>, Observations) {
    let patterns: Vec<Vec<usize>> = (0..k).map(|_| (0..model.dim()).collect()).collect();
    simulate_with_patterns(model, &patterns, seed)
}

/// Simulates with a per-step observation pattern (which nodes report).
pub fn simulate_with_patterns(
    model: &StateSpaceModel,
    patterns: &[Vec<usize>],
    seed: u64,
) -> (Vec<DVector<f64>>, Observations) {
    let m = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init_sqrt = StateSpaceModel::psd_sqrt(model.initial.covariance());
    let q_sqrt = StateSpaceModel::psd_sqrt(&model.process_noise);
    let mut states = Vec::with_capacity(patterns.len());
    let mut steps = Vec::with_capacity(patterns.len());
    let mut y: DVector<f64> = DVector::zeros(m);
    for (t, pattern) in patterns.iter().enumerate() {
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        y = if t == 0 {
            model.initial.mean() + &init_sqrt * z
        } else {
            &model.transition * &y + &q_sqrt * z
        };
        let mut obs = Vec::with_capacity(pattern.len());
        for &node in pattern {
            let e: f64 = StandardNormal.sample(&mut rng);
            obs.push((node, y[node] + model.obs_noise[node].sqrt() * e));
        }
        states.push(y.clone());
        steps.push(obs);
    }
    (states, Observations { steps })
}

/// Standard Kalman predict/update recursion with the Joseph-form
/// covariance update; time steps without data run the predict step only.
pub fn filter(model: &StateSpaceModel, observations: &Observations) -> Result<FilterOutput> {
    let m = model.dim();
    let k = observations.k();
    let mut filtered_means = Vec::with_capacity(k);
    let mut filtered_covs = Vec::with_capacity(k);
    let mut forecast_means = Vec::with_capacity(k);
    let mut forecast_covs = Vec::with_capacity(k);
    let mut loglik = 0.0;

    let mut x = model.initial.mean().clone();
    let mut p = model.initial.covariance().clone();
    for (t, step) in observations.steps.iter().enumerate() {
        // predict
        let (x_pred, mut p_pred) = if t == 0 {
            (x.clone(), p.clone())
        } else {
            let xp = &model.transition * &x;
            let pp = &model.transition * &p * model.transition.transpose() + &model.process_noise;
            (xp, pp)
        };
        linalg::symmetrize(&mut p_pred);
        forecast_means.push(x_pred.clone());
        forecast_covs.push(p_pred.clone());

        if step.is_empty() {
            x = x_pred;
            p = p_pred;
        } else {
            let h = step.len();
            let mut seen = vec![false; m];
            for &(node, _) in step {
                if node >= m {
                    return Err(Error::DimensionMismatch(format!(
                        "observed node {node} out of range for state dimension {m} at step {}",
                        t + 1
                    )));
                }
                if seen[node] {
                    return Err(Error::DimensionMismatch(format!(
                        "node {node} observed twice at step {}",
                        t + 1
                    )));
                }
                seen[node] = true;
            }
            // S = H P H' + R on the observed subset
            let mut s = DMatrix::zeros(h, h);
            for (a, &(na, _)) in step.iter().enumerate() {
                for (b, &(nb, _)) in step.iter().enumerate() {
                    s[(a, b)] = p_pred[(na, nb)];
                }
                s[(a, a)] += model.obs_noise[na];
            }
            linalg::symmetrize(&mut s);
            let chol = nalgebra::Cholesky::new(s.clone())
                .ok_or(Error::NonPositiveInnovationCovariance(t + 1))?;
            let innovation =
                DVector::from_iterator(h, step.iter().map(|&(node, z)| z - x_pred[node]));
            // K = P H' S^{-1}
            let mut ph_t = DMatrix::zeros(m, h);
            for (b, &(nb, _)) in step.iter().enumerate() {
                for a in 0..m {
                    ph_t[(a, b)] = p_pred[(a, nb)];
                }
            }
            let gain = chol.solve(&ph_t.transpose()).transpose(); // m x h
            x = &x_pred + &gain * &innovation;
            // Joseph form: (I - K H) P (I - K H)' + K R K'
            let mut i_kh = DMatrix::identity(m, m);
            for (b, &(nb, _)) in step.iter().enumerate() {
                for a in 0..m {
                    i_kh[(a, nb)] -= gain[(a, b)];
                }
            }
            let mut r = DMatrix::zeros(h, h);
            for (a, &(na, _)) in step.iter().enumerate() {
                r[(a, a)] = model.obs_noise[na];
            }
            p = &i_kh * &p_pred * i_kh.transpose() + &gain * r * gain.transpose();
            linalg::symmetrize(&mut p);

            let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            let quad = innovation.dot(&chol.solve(&innovation));
            loglik += -0.5 * (h as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad);
        }
        filtered_means.push(x.clone());
        filtered_covs.push(p.clone());
    }
    Ok(FilterOutput { filtered_means, filtered_covs, forecast_means, forecast_covs, log_likelihood: loglik })
}

/// Fixed-interval (RTS) smoother: backward recursion from the filter.
pub fn smooth(model: &StateSpaceModel, observations: &Observations) -> Result<SmootherOutput> {
    let f = filter(model, observations)?;
    let k = observations.k();
    let mut means = f.filtered_means.clone();
    let mut covs = f.filtered_covs.clone();
    if k == 0 {
        return Ok(SmootherOutput { means, covs });
    }
    for t in (0..k - 1).rev() {
        // gain G = P_f(t) M' P_pred(t+1)^{-1}
        let p_pred_next = &f.forecast_covs[t + 1];
        let chol = linalg::cholesky_with_jitter(p_pred_next).map_err(|_| Error::SingularSystem)?;
        let g = chol
            .solve(&(&model.transition * &f.filtered_covs[t]))
            .transpose(); // m x m
        means[t] = &f.filtered_means[t] + &g * (&means[t + 1] - &f.forecast_means[t + 1]);
        let mut c =
            &f.filtered_covs[t] + &g * (&covs[t + 1] - p_pred_next) * g.transpose();
        linalg::symmetrize(&mut c);
        covs[t] = c;
    }
    Ok(SmootherOutput { means, covs })
}

/// h-step-ahead forecasts from the last filtered state: repeated
/// application of the predict step.
pub fn forecast(
    model: &StateSpaceModel,
    filter_output: &FilterOutput,
    horizon: usize,
) -> Vec<(DVector<f64>, DMatrix<f64>)> {
    let mut out = Vec::with_capacity(horizon);
    let mut x = filter_output
        .filtered_means
        .last()
        .cloned()
        .unwrap_or_else(|| model.initial.mean().clone());
    let mut p = filter_output
        .filtered_covs
        .last()
        .cloned()
        .unwrap_or_else(|| model.initial.covariance().clone());
    for _ in 0..horizon {
        x = &model.transition * &x;
        p = &model.transition * &p * model.transition.transpose() + &model.process_noise;
        linalg::symmetrize(&mut p);
        out.push((x.clone(), p.clone()));
    }
    out
}

/// Filter output rows `t,node_index,filtered_mean,filtered_sd`.
pub fn filter_output_csv(output: &FilterOutput) -> String {
    let mut out = String::from("t,node_index,filtered_mean,filtered_sd\n");
    for (t, (mean, cov)) in output
        .filtered_means
        .iter()
        .zip(&output.filtered_covs)
        .enumerate()
    {
        for i in 0..mean.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t + 1,
                i,
                mean[i],
                cov[(i, i)].max(0.0).sqrt()
            ));
        }
    }
    out
}
