//! Scalable approximation of the Gaussian joint: an artificial ordering
//! of the locations, a bounded set of predecessor neighbors per node,
//! and the resulting sparse triangular factorization of the joint
//! density. With the neighbor bound q at its maximum the factorization
//! is exact; small q trades accuracy for near-linear cost.
//!
//! Everything here works with zero-mean processes; center the data
//! before building factors.

use nalgebra::{DMatrix, DVector};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::geom::{check_distinct, Location};

/// How the artificial ordering is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingStrategy {
    /// lexicographic by coordinates; reproducible baseline
    CoordinateSort,
    /// first the node nearest the centroid, then repeatedly the node
    /// maximizing the minimum distance to the already-ordered set;
    /// better accuracy per neighbor in practice
    MaxMin,
}

/// A permutation of the node indices: `perm[k]` is the original index of
/// the k-th ordered node.
#[derive(Debug, Clone)]
pub struct Ordering {
    perm: Vec<usize>,
    strategy: OrderingStrategy,
}

impl Ordering {
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn strategy(&self) -> OrderingStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// original index of the node at an order position
    pub fn original(&self, position: usize) -> usize {
        self.perm[position]
    }
}

/// Imposes an artificial ordering on distinct locations. Deterministic:
/// ties break toward the lowest original index.
pub fn order_locations(locations: &[Location], strategy: OrderingStrategy) -> Result<Ordering> {
    check_distinct(locations)?;
    let n = locations.len();
    let perm = match strategy {
        OrderingStrategy::CoordinateSort => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                locations[a]
                    .coords()
                    .partial_cmp(locations[b].coords())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx
        }
        OrderingStrategy::MaxMin => {
            let d = locations[0].dim();
            let centroid = Location::new(
                (0..d)
                    .map(|k| locations.iter().map(|p| p.coord(k)).sum::<f64>() / n as f64)
                    .collect(),
            )?;
            let mut perm = Vec::with_capacity(n);
            let mut min_dist = vec![f64::INFINITY; n];
            let mut used = vec![false; n];
            // start at the node nearest the centroid
            let mut first = 0;
            for i in 1..n {
                if locations[i].distance(&centroid) < locations[first].distance(&centroid) {
                    first = i;
                }
            }
            perm.push(first);
            used[first] = true;
            for i in 0..n {
                min_dist[i] = locations[i].distance(&locations[first]);
            }
            while perm.len() < n {
                let mut best = usize::MAX;
                let mut best_d = f64::NEG_INFINITY;
                for i in 0..n {
                    if !used[i] && min_dist[i] > best_d {
                        best = i;
                        best_d = min_dist[i];
                    }
                }
                perm.push(best);
                used[best] = true;
                for i in 0..n {
                    if !used[i] {
                        min_dist[i] = min_dist[i].min(locations[i].distance(&locations[best]));
                    }
                }
            }
            perm
        }
    };
    Ok(Ordering { perm, strategy })
}

/// Predecessor-neighbor structure: node (i) conditions on at most q of
/// its nearest predecessors in the ordering. Acyclic by construction;
/// the relations are not reciprocal.
#[derive(Debug, Clone)]
pub struct NeighborDag {
    ordering: Ordering,
    /// per order position: neighbor order positions, ascending
    neighbors: Vec<Vec<usize>>,
    q: usize,
    /// order positions >= n_data are prediction nodes
    n_data: usize,
}

impl NeighborDag {
    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    /// neighbor order positions of the node at an order position
    pub fn neighbors_of(&self, position: usize) -> &[usize] {
        &self.neighbors[position]
    }

    /// CSV export `node_order,neighbor_order_indices...`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            out.push_str(&i.to_string());
            for &j in nbrs {
                out.push_str(&format!(",{j}"));
            }
            out.push('\n');
        }
        out
    }
}

/// q nearest predecessors (Euclidean) per ordered node; distance ties
/// break toward the lower order index.
pub fn select_neighbors(ordering: &Ordering, locations: &[Location], q: usize) -> NeighborDag {
    let n = ordering.len();
    assert_eq!(n, locations.len(), "ordering and locations disagree");
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        neighbors.push(nearest_predecessors(ordering, locations, i, 0, i.min(usize::MAX), q));
    }
    NeighborDag { ordering: ordering.clone(), neighbors, q, n_data: n }
}

/// q nearest nodes among order positions [from, to) to the node at
/// order position `at`; distance ties break toward the lower order index.
fn nearest_predecessors(
    ordering: &Ordering,
    locations: &[Location],
    at: usize,
    from: usize,
    to: usize,
    q: usize,
) -> Vec<usize> {
    let target = &locations[ordering.original(at)];
    let mut cand: Vec<(f64, usize)> = (from..to)
        .map(|p| (target.distance(&locations[ordering.original(p)]), p))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    if q < cand.len() {
        // partial selection keeps this linear in the candidate count
        cand.select_nth_unstable_by(q, cmp);
        cand.truncate(q);
    }
    let mut picked: Vec<usize> = cand.into_iter().take(q).map(|(_, p)| p).collect();
    picked.sort_unstable();
    picked
}

/// Orders the data locations by `strategy`, appends the prediction
/// locations after them (input order), and lets each prediction node
/// neighbor only data nodes. Prediction is then a set of independent
/// small conditionings.
pub fn prediction_dag(
    data_locations: &[Location],
    prediction_locations: &[Location],
    strategy: OrderingStrategy,
    q: usize,
) -> Result<NeighborDag> {
    let data_ordering = order_locations(data_locations, strategy)?;
    let n = data_locations.len();
    let p = prediction_locations.len();
    let mut all: Vec<Location> = data_locations.to_vec();
    all.extend_from_slice(prediction_locations);
    let mut perm: Vec<usize> = data_ordering.permutation().to_vec();
    perm.extend(n..n + p);
    let ordering = Ordering { perm, strategy };
    let mut neighbors = Vec::with_capacity(n + p);
    for i in 0..n {
        neighbors.push(nearest_predecessors(&ordering, &all, i, 0, i, q));
    }
    for i in n..n + p {
        // prediction nodes draw neighbors from the data block only
        neighbors.push(nearest_predecessors(&ordering, &all, i, 0, n, q));
    }
    Ok(NeighborDag { ordering, neighbors, q, n_data: n })
}

/// Sparse triangular representation of the implied joint: per ordered
/// node, regression coefficients on its neighbors and a residual
/// variance.
#[derive(Debug, Clone)]
pub struct VecchiaFactor {
    dag: NeighborDag,
    coeffs: Vec<DVector<f64>>,
    resid_vars: Vec<f64>,
}

/// Conditional coefficients and residual variance of one node given a
/// set of locations under the model.
fn node_conditional(
    model: &CovarianceModel,
    target: &Location,
    nbr_locs: &[Location],
    position: usize,
) -> Result<(DVector<f64>, f64)> {
    let q = nbr_locs.len();
    if q == 0 {
        return Ok((DVector::zeros(0), model.variance()));
    }
    let mut sigma_nn = DMatrix::zeros(q, q);
    for a in 0..q {
        sigma_nn[(a, a)] = model.variance();
        for b in (a + 1)..q {
            let c = model.cov_between(&nbr_locs[a], &nbr_locs[b]);
            sigma_nn[(a, b)] = c;
            sigma_nn[(b, a)] = c;
        }
    }
    let sigma_tn = DVector::from_iterator(q, nbr_locs.iter().map(|l| model.cov_between(target, l)));
    let chol = crate::linalg::cholesky_with_jitter(&sigma_nn)
        .map_err(|_| Error::SingularNeighborBlock(position))?;
    let coeffs = chol.solve(&sigma_tn);
    let resid = model.variance() - coeffs.dot(&sigma_tn);
    if resid <= 0.0 || !resid.is_finite() {
        return Err(Error::SingularNeighborBlock(position));
    }
    Ok((coeffs, resid))
}

/// Builds the sparse factor of the joint under a covariance model: one
/// small dense conditioning per node, each against at most q neighbors.
pub fn build_factor(
    dag: &NeighborDag,
    model: &CovarianceModel,
    locations: &[Location],
) -> Result<VecchiaFactor> {
    let n = dag.len();
    assert_eq!(n, locations.len(), "dag and locations disagree");
    let mut coeffs = Vec::with_capacity(n);
    let mut resid_vars = Vec::with_capacity(n);
    for i in 0..n {
        let target = &locations[dag.ordering.original(i)];
        let nbr_locs: Vec<Location> = dag.neighbors[i]
            .iter()
            .map(|&p| locations[dag.ordering.original(p)].clone())
            .collect();
        let (c, v) = node_conditional(model, target, &nbr_locs, i)?;
        coeffs.push(c);
        resid_vars.push(v);
    }
    Ok(VecchiaFactor { dag: dag.clone(), coeffs, resid_vars })
}

impl VecchiaFactor {
    pub fn dag(&self) -> &NeighborDag {
        &self.dag
    }

    pub fn residual_variances(&self) -> &[f64] {
        &self.resid_vars
    }

    /// Log density of the zero-mean implied joint at `values` (original
    /// index order). The length must match the factor.
    pub fn loglik(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.dag.len(), "value vector length mismatch");
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut total = 0.0;
        for i in 0..self.dag.len() {
            let x = values[self.dag.ordering.original(i)];
            let mean: f64 = self.dag.neighbors[i]
                .iter()
                .zip(self.coeffs[i].iter())
                .map(|(&p, c)| c * values[self.dag.ordering.original(p)])
                .sum();
            let v = self.resid_vars[i];
            let r = x - mean;
            total += -0.5 * (ln_2pi + v.ln() + r * r / v);
        }
        total
    }

    /// Reconstructs the implied joint covariance densely (original index
    /// order); for validation on small instances.
    pub fn implied_covariance_dense(&self) -> DMatrix<f64> {
        let n = self.dag.len();
        // X_ord = B X_ord + e  =>  X_ord = (I - B)^{-1} e, e ~ N(0, D)
        let mut i_minus_b = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for (k, &p) in self.dag.neighbors[i].iter().enumerate() {
                i_minus_b[(i, p)] -= self.coeffs[i][k];
            }
        }
        let inv = i_minus_b
            .lu()
            .try_inverse()
            .expect("unit lower-triangular matrix is invertible");
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&self.resid_vars));
        let cov_ord: DMatrix<f64> = &inv * d * inv.transpose();
        // permute back to original indices
        let mut cov = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                cov[(self.dag.ordering.original(a), self.dag.ordering.original(b))] =
                    cov_ord[(a, b)];
            }
        }
        cov
    }
}

/// Approximate kriging through the prediction DAG: each prediction node
/// is conditioned on its (data-only) neighbor set, with measurement
/// noise folded into the data-node covariance. q >= n recovers exact
/// simple kriging with zero prior mean.
///
/// Returns (mean, variance) per prediction location.
pub fn krige(
    dag: &NeighborDag,
    model: &CovarianceModel,
    all_locations: &[Location],
    data_values: &[f64],
    noise: f64,
) -> Result<Vec<(f64, f64)>> {
    let n = dag.n_data();
    let total = dag.len();
    assert_eq!(all_locations.len(), total, "dag and locations disagree");
    if data_values.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} data values for {} data nodes",
            data_values.len(),
            n
        )));
    }
    if noise < 0.0 || !noise.is_finite() {
        return Err(Error::InvalidParameter {
            name: "noise",
            message: format!("measurement noise variance must be non-negative, got {noise}"),
        });
    }
    let mut out = Vec::with_capacity(total - n);
    for i in n..total {
        let target = &all_locations[dag.ordering.original(i)];
        let nbrs = &dag.neighbors[i];
        let q = nbrs.len();
        if q == 0 {
            out.push((0.0, model.variance()));
            continue;
        }
        let mut sigma_nn = DMatrix::zeros(q, q);
        let mut z = DVector::zeros(q);
        for a in 0..q {
            let oa = dag.ordering.original(nbrs[a]);
            sigma_nn[(a, a)] = model.variance() + noise;
            z[a] = data_values[oa];
            for b in (a + 1)..q {
                let ob = dag.ordering.original(nbrs[b]);
                let c = model.cov_between(&all_locations[oa], &all_locations[ob]);
                sigma_nn[(a, b)] = c;
                sigma_nn[(b, a)] = c;
            }
        }
        let sigma_tn = DVector::from_iterator(
            q,
            nbrs.iter().map(|&p| {
                model.cov_between(target, &all_locations[dag.ordering.original(p)])
            }),
        );
        let chol =
            crate::linalg::cholesky_with_jitter(&sigma_nn).map_err(|_| Error::SingularSystem)?;
        let w = chol.solve(&sigma_tn);
        let mean = w.dot(&z);
        let var = (model.variance() - w.dot(&sigma_tn)).max(0.0);
        out.push((mean, var));
    }
    Ok(out)
}
