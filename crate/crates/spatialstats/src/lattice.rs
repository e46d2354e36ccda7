//! Lattice processes: neighborhood graphs, conditional-autoregressive
//! (Gaussian MRF) models, exact and checkerboard-Gibbs sampling, and
//! prediction at lattice nodes.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSpec;
use crate::geom::Location;
use crate::sparse::{SkylineCholesky, SkylineMatrix};

/// Undirected spatial-dependence structure over lattice nodes.
///
/// Entries of the weight matrix W are nonzero exactly on the stored
/// edges; a node is never its own neighbor.
#[derive(Debug, Clone)]
pub struct NeighborhoodGraph {
    nodes: Vec<Location>,
    /// per node: (neighbor index, weight), ascending by index
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborhoodGraph {
    /// Builds from undirected weighted edges (each listed once).
    pub fn from_undirected_edges(
        nodes: Vec<Location>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n = nodes.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({i},{j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter {
                    name: "edges",
                    message: format!("self-loop at node {i}: a location is not its own neighbor"),
                });
            }
            if !w.is_finite() || w == 0.0 {
                return Err(Error::InvalidParameter {
                    name: "edges",
                    message: format!("edge ({i},{j}) needs a finite nonzero weight"),
                });
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for (i, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_by_key(|&(j, _)| j);
            if nbrs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidParameter {
                    name: "edges",
                    message: format!("duplicate edge at node {i}"),
                });
            }
        }
        Ok(Self { nodes, adjacency })
    }

    /// Regular nx-by-ny grid with first-order (rook) adjacency and unit
    /// weights. Node (x, y) with 1-based coordinates sits at index
    /// (y-1)*nx + (x-1).
    pub fn grid(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::ZeroSize);
        }
        let mut nodes = Vec::with_capacity(nx * ny);
        for y in 1..=ny {
            for x in 1..=nx {
                nodes.push(Location::xy(x as f64, y as f64));
            }
        }
        let idx = |x: usize, y: usize| (y - 1) * nx + (x - 1);
        let mut edges = Vec::new();
        for y in 1..=ny {
            for x in 1..=nx {
                if x < nx {
                    edges.push((idx(x, y), idx(x + 1, y), 1.0));
                }
                if y < ny {
                    edges.push((idx(x, y), idx(x, y + 1), 1.0));
                }
            }
        }
        Self::from_undirected_edges(nodes, &edges)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Location] {
        &self.nodes
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, w)| w)
    }

    /// Dense W, for oracles and small instances.
    pub fn adjacency_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut w = DMatrix::zeros(n, n);
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &(j, v) in nbrs {
                w[(i, j)] = v;
            }
        }
        w
    }

    /// Edge-list CSV `i,j,w`, each undirected edge once with i < j.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("i,j,w\n");
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            for &(j, w) in nbrs {
                if i < j {
                    out.push_str(&format!("{i},{j},{w}\n"));
                }
            }
        }
        out
    }
}

/// Proper 2-coloring of a bipartite graph: no edge inside a color class.
///
/// Nodes within one class are conditionally independent given the other,
/// which is what makes blockwise Gibbs sweeps valid.
pub fn checkerboard_partition(graph: &NeighborhoodGraph) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = graph.n();
    let mut color = vec![u8::MAX; n];
    let mut parent = vec![usize::MAX; n];
    for root in 0..n {
        if color[root] != u8::MAX {
            continue;
        }
        color[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in graph.neighbors(u) {
                if color[v] == u8::MAX {
                    color[v] = 1 - color[u];
                    parent[v] = u;
                    queue.push_back(v);
                } else if color[v] == color[u] {
                    return Err(Error::NotBipartite(odd_cycle(&parent, u, v)));
                }
            }
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, &c) in color.iter().enumerate() {
        if c == 0 {
            a.push(i)
        } else {
            b.push(i)
        }
    }
    Ok((a, b))
}

/// Reconstructs the odd cycle closed by edge (u, v) from BFS parents.
fn odd_cycle(parent: &[usize], u: usize, v: usize) -> Vec<usize> {
    let chain = |mut x: usize| {
        let mut path = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            path.push(x);
        }
        path
    };
    let pu = chain(u);
    let pv = chain(v);
    // drop the common tail up to the lowest common ancestor
    let mut i = pu.len();
    let mut j = pv.len();
    while i > 1 && j > 1 && pu[i - 2] == pv[j - 2] {
        i -= 1;
        j -= 1;
    }
    let mut cycle: Vec<usize> = pu[..i].to_vec();
    cycle.extend(pv[..j - 1].iter().rev());
    cycle
}

/// How [`CarModel::sample`] draws its fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMethod {
    /// sparse factorization of the precision, one triangular solve per draw
    Exact,
    /// checkerboard Gibbs sweeps; one retained draw per sweep after burn-in
    Gibbs { burn_in: usize },
}

impl SampleMethod {
    /// Gibbs with the default 50 burn-in sweeps.
    pub fn gibbs() -> Self {
        SampleMethod::Gibbs { burn_in: 50 }
    }
}

/// A zero-mean conditional-autoregressive model: conditional means
/// sum_j c_ij Y(s_j) over the neighbors and conditional variances tau_i^2,
/// with joint Gau(0, (I - C)^{-1} M).
///
/// Validated at construction: the precision M^{-1}(I - C) must be
/// symmetric and positive definite. Nonzero means are handled by
/// centering the data externally.
#[derive(Debug, Clone)]
pub struct CarModel {
    graph: NeighborhoodGraph,
    /// rows of C, ascending by column; pattern inside the graph's
    coeffs: Vec<Vec<(usize, f64)>>,
    /// conditional variances tau_i^2 (the diagonal of M)
    cond_vars: Vec<f64>,
    /// validated sparse factor of the precision
    factor: SkylineCholesky,
    /// lower-triangle triplets of the precision, kept for conditioning
    precision_triplets: Vec<(usize, usize, f64)>,
}

impl CarModel {
    /// Validates and assembles a CAR model from the coefficient entries
    /// of C (zero diagonal implied; entries only on graph edges) and the
    /// conditional variances.
    pub fn new(
        graph: NeighborhoodGraph,
        c_entries: &[(usize, usize, f64)],
        cond_vars: Vec<f64>,
    ) -> Result<Self> {
        let n = graph.n();
        if cond_vars.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} conditional variances for {} nodes",
                cond_vars.len(),
                n
            )));
        }
        if let Some(i) = cond_vars.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "cond_vars",
                message: format!("conditional variance at node {i} must be positive"),
            });
        }
        let mut coeffs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, c) in c_entries {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient ({i},{j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    message: format!("diagonal coefficient at node {i} must be zero"),
                });
            }
            if c != 0.0 && graph.weight(i, j) == 0.0 {
                return Err(Error::InvalidParameter {
                    name: "coefficients",
                    message: format!("coefficient ({i},{j}) falls outside the neighborhood graph"),
                });
            }
            if c != 0.0 {
                coeffs[i].push((j, c));
            }
        }
        for row in coeffs.iter_mut() {
            row.sort_by_key(|&(j, _)| j);
        }

        // precision Q = M^{-1}(I - C): Q_ii = 1/tau_i^2, Q_ij = -c_ij/tau_i^2.
        // symmetry requires c_ij/tau_i^2 = c_ji/tau_j^2.
        let coeff = |i: usize, j: usize| -> f64 {
            coeffs[i]
                .iter()
                .find(|&&(k, _)| k == j)
                .map_or(0.0, |&(_, c)| c)
        };
        let mut triplets = Vec::with_capacity(n + c_entries.len());
        let mut scale = 0.0f64;
        for (i, &t) in cond_vars.iter().enumerate() {
            triplets.push((i, i, 1.0 / t));
            scale = scale.max(1.0 / t);
        }
        for i in 0..n {
            for &(j, c_ij) in &coeffs[i] {
                if j > i {
                    continue;
                }
                let q_ij = -c_ij / cond_vars[i];
                let q_ji = -coeff(j, i) / cond_vars[j];
                if (q_ij - q_ji).abs() > 1e-10 * scale.max(1.0) {
                    return Err(Error::AsymmetricPrecision(i, j));
                }
                triplets.push((i, j, q_ij));
            }
        }
        // entries seen only from the upper triangle (c_ij = 0, c_ji != 0)
        for j in 0..n {
            for &(i, _) in &coeffs[j] {
                if i > j && coeff(i, j) == 0.0 {
                    return Err(Error::AsymmetricPrecision(i, j));
                }
            }
        }

        let precision = SkylineMatrix::from_triplets(n, &triplets)?;
        let factor = precision.cholesky()?;
        Ok(Self { graph, coeffs, cond_vars, factor, precision_triplets: triplets })
    }

    /// Homogeneous CAR: C = rho W, M = tau2 I. Valid for rho between the
    /// reciprocals of the extreme eigenvalues of W.
    pub fn homogeneous(graph: NeighborhoodGraph, rho: f64, tau2: f64) -> Result<Self> {
        let mut entries = Vec::new();
        for i in 0..graph.n() {
            for &(j, w) in graph.neighbors(i) {
                entries.push((i, j, rho * w));
            }
        }
        let n = graph.n();
        Self::new(graph, &entries, vec![tau2; n])
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &NeighborhoodGraph {
        &self.graph
    }

    pub fn cond_vars(&self) -> &[f64] {
        &self.cond_vars
    }

    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, c)| c)
    }

    /// Dense precision Q = M^{-1}(I - C).
    pub fn precision_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut q = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.precision_triplets {
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
        q
    }

    /// Dense joint covariance (I - C)^{-1} M; O(n^3), intended for small
    /// lattices and oracles.
    pub fn covariance_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut cov = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            let col = self.factor.solve(&e);
            cov.set_column(j, &col);
        }
        crate::linalg::symmetrize(&mut cov);
        cov
    }

    /// The joint distribution Gau(0, (I - C)^{-1} M) as a dense spec.
    pub fn joint(&self) -> Result<GaussianSpec> {
        GaussianSpec::new(DVector::zeros(self.n()), self.covariance_dense())
    }

    /// Draws fields from the joint distribution; deterministic given the
    /// seed. The exact method solves L'x = z against the sparse factor of
    /// the precision; the Gibbs method runs checkerboard sweeps and
    /// retains one draw per sweep after burn-in.
    pub fn sample(
        &self,
        n_samples: usize,
        seed: u64,
        method: SampleMethod,
    ) -> Result<Vec<DVector<f64>>> {
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match method {
            SampleMethod::Exact => {
                let mut out = Vec::with_capacity(n_samples);
                for _ in 0..n_samples {
                    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                    out.push(self.factor.solve_upper(&z));
                }
                Ok(out)
            }
            SampleMethod::Gibbs { burn_in } => {
                let (black, white) = checkerboard_partition(&self.graph)?;
                let mut y = DVector::zeros(n);
                let mut out = Vec::with_capacity(n_samples);
                let sweep = |y: &mut DVector<f64>, rng: &mut ChaCha8Rng| {
                    // nodes within a color are conditionally independent
                    // given the other color; update order inside a color
                    // does not matter, but is fixed for reproducibility
                    for class in [&black, &white] {
                        for &i in class {
                            let mean: f64 =
                                self.coeffs[i].iter().map(|&(j, c)| c * y[j]).sum();
                            let z: f64 = StandardNormal.sample(rng);
                            y[i] = mean + self.cond_vars[i].sqrt() * z;
                        }
                    }
                };
                for _ in 0..burn_in {
                    sweep(&mut y, &mut rng);
                }
                for _ in 0..n_samples {
                    sweep(&mut y, &mut rng);
                    out.push(y.clone());
                }
                Ok(out)
            }
        }
    }

    /// Best prediction at lattice nodes from noisy partial observations
    /// of the field: Gaussian conditioning carried out in precision form
    /// on the sparse factorization.
    ///
    /// Returns (mean, variance) per target node. Targets observed with
    /// zero noise come back as the observation with zero variance.
    pub fn predict(
        &self,
        observations: &[CarObservation],
        targets: &[usize],
    ) -> Result<Vec<(f64, f64)>> {
        let n = self.n();
        let mut seen = vec![false; n];
        for o in observations {
            if o.node >= n {
                return Err(Error::DimensionMismatch(format!(
                    "observed node {} out of range for {n} nodes",
                    o.node
                )));
            }
            if seen[o.node] {
                return Err(Error::InvalidParameter {
                    name: "observations",
                    message: format!("node {} observed twice", o.node),
                });
            }
            if o.noise_variance < 0.0 || !o.noise_variance.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "observations",
                    message: "noise variances must be finite and non-negative".into(),
                });
            }
            seen[o.node] = true;
        }
        if targets.iter().any(|&t| t >= n) {
            return Err(Error::DimensionMismatch("target node out of range".into()));
        }

        // exact observations leave the joint by conditioning, which in
        // precision form is just dropping their rows/columns
        let mut exact_value = vec![None::<f64>; n];
        for o in observations {
            if o.noise_variance == 0.0 {
                exact_value[o.node] = Some(o.value);
            }
        }
        let rest: Vec<usize> = (0..n).filter(|&i| exact_value[i].is_none()).collect();
        let pos_in_rest: std::collections::HashMap<usize, usize> =
            rest.iter().enumerate().map(|(p, &i)| (i, p)).collect();

        if rest.is_empty() {
            return Ok(targets
                .iter()
                .map(|&t| (exact_value[t].unwrap(), 0.0))
                .collect());
        }

        // posterior precision: principal submatrix of Q over `rest`, plus
        // 1/noise on noisily observed nodes
        let mut triplets = Vec::new();
        let mut info = DVector::<f64>::zeros(rest.len());
        for &(i, j, q) in &self.precision_triplets {
            match (pos_in_rest.get(&i), pos_in_rest.get(&j)) {
                (Some(&pi), Some(&pj)) => triplets.push((pi, pj, q)),
                (Some(&pi), None) => info[pi] -= q * exact_value[j].unwrap(),
                (None, Some(&pj)) => info[pj] -= q * exact_value[i].unwrap(),
                (None, None) => {}
            }
        }
        for o in observations {
            if o.noise_variance > 0.0 {
                let p = pos_in_rest[&o.node];
                triplets.push((p, p, 1.0 / o.noise_variance));
                info[p] += o.value / o.noise_variance;
            }
        }
        let posterior = SkylineMatrix::from_triplets(rest.len(), &triplets)?;
        let factor = posterior.cholesky().map_err(|_| Error::SingularSystem)?;
        let mean = factor.solve(&info);

        let mut out = Vec::with_capacity(targets.len());
        for &t in targets {
            match exact_value[t] {
                Some(v) => out.push((v, 0.0)),
                None => {
                    let p = pos_in_rest[&t];
                    let mut e = DVector::zeros(rest.len());
                    e[p] = 1.0;
                    let col = factor.solve(&e);
                    out.push((mean[p], col[p]));
                }
            }
        }
        Ok(out)
    }
}

/// One noisy observation of the lattice field.
#[derive(Debug, Clone, Copy)]
pub struct CarObservation {
    pub node: usize,
    pub value: f64,
    pub noise_variance: f64,
}
