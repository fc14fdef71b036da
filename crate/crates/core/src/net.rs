//! Network topologies, doubly stochastic weight matrices and their spectra.
//!
//! A [`Graph`] is simple and undirected. A [`WeightMatrix`] is a dense,
//! symmetric, row-stochastic, nonnegative matrix; its support (off-diagonal
//! nonzeros) is the communication graph. [`SpectralInfo`] summarizes the
//! eigenvalues, in particular `mu = |lambda_2|` (second largest modulus) which
//! drives every consensus rate in the crate.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

/// Entrywise tolerance for the weight-matrix invariants.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Placements tried by [`generate_geometric`] before giving up.
pub const GEOMETRIC_RETRIES: usize = 100;

/// Simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, normalizing every pair to `(min, max)`. Rejects
    /// self-loops, duplicate edges and out-of-range endpoints.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidGraph("node count must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(LabError::InvalidGraph(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(LabError::InvalidGraph(format!("edge ({a},{b}) out of range for n={n}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(LabError::InvalidGraph(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(Self { n, edges: set })
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path graph is simple")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges).expect("complete graph is simple")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// `|E| / (n(n-1)/2)`; 0 for a single node.
    pub fn relative_degree(&self) -> f64 {
        let pairs = self.n * (self.n.saturating_sub(1)) / 2;
        if pairs == 0 {
            0.0
        } else {
            self.edges.len() as f64 / pairs as f64
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

/// Breadth-first reachability from node 0.
pub fn is_connected(g: &Graph) -> bool {
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == g.n
}

/// Random geometric graph on the unit square with a prescribed relative degree.
///
/// For each placement, the radius is put between consecutive sorted pairwise
/// distances so that the graph has `m = round(density * n(n-1)/2)` edges, or,
/// if that graph is disconnected, the smallest edge count that connects it, as
/// long as the density stays within [`density_tolerance`]. Placements that need
/// more edges are redrawn from the same RNG stream, up to
/// [`GEOMETRIC_RETRIES`] times.
pub fn generate_geometric(n: usize, target_density: f64, seed: u64) -> Result<Graph> {
    generate_geometric_with_retries(n, target_density, seed, GEOMETRIC_RETRIES)
}

/// [`generate_geometric`] with an explicit placement budget. Small sparse
/// graphs (e.g. 30 nodes at density 0.10) are connected in only about one
/// placement in a hundred.
pub fn generate_geometric_with_retries(n: usize, target_density: f64, seed: u64, retries: usize) -> Result<Graph> {
    if n < 2 {
        return Err(invalid("n", "geometric graphs need at least 2 nodes"));
    }
    if !(target_density > 0.0 && target_density <= 1.0) {
        return Err(invalid("target_density", format!("{target_density} not in (0, 1]")));
    }
    let pairs = n * (n - 1) / 2;
    let tol = density_tolerance(n);
    let tree_density = (n - 1) as f64 / pairs as f64;
    if target_density + tol < tree_density {
        return Err(LabError::InfeasibleDensity {
            n,
            density: target_density,
            attempts: 0,
        });
    }
    let m = ((target_density * pairs as f64).round() as usize).clamp(n - 1, pairs);
    let m_hi = (((target_density + tol) * pairs as f64 + 1e-9).floor() as usize).min(pairs);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..retries {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let mut dists = Vec::with_capacity(pairs);
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                dists.push(((dx * dx + dy * dy).sqrt(), i, j));
            }
        }
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m_conn = edges_to_connect(n, &dists);
        if m_conn <= m_hi {
            let g = Graph::new(n, dists[..m.max(m_conn)].iter().map(|&(_, i, j)| (i, j)))?;
            return Ok(g);
        }
    }
    Err(LabError::InfeasibleDensity {
        n,
        density: target_density,
        attempts: retries,
    })
}

/// Length of the shortest prefix of `sorted` pairs that connects all nodes.
fn edges_to_connect(n: usize, sorted: &[(f64, usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let mut components = n;
    for (idx, &(_, i, j)) in sorted.iter().enumerate() {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a] = b;
            components -= 1;
            if components == 1 {
                return idx + 1;
            }
        }
    }
    usize::MAX
}

/// Achievable density accuracy: 0.01, or half an edge when the graph is too
/// small for that.
pub fn density_tolerance(n: usize) -> f64 {
    let pairs = (n * n.saturating_sub(1) / 2).max(1);
    0.01f64.max(0.5 / pairs as f64)
}

/// Dense symmetric doubly stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Two-node matrix `[[1-w, w], [w, 1-w]]`.
    pub fn two_node(off_diagonal: f64) -> Result<Self> {
        custom_weights(
            2,
            &[
                vec![1.0 - off_diagonal, off_diagonal],
                vec![off_diagonal, 1.0 - off_diagonal],
            ],
        )
    }

    /// Graph formed by the positive off-diagonal entries.
    pub fn support_graph(&self) -> Graph {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.get(i, j) > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(self.n, edges).expect("support of a symmetric matrix is simple")
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// `W - J` with `J = (1/n) 1 1^T`.
    pub fn centered(&self) -> DMatrix<f64> {
        let inv = 1.0 / self.n as f64;
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j) - inv)
    }

    fn validate(n: usize, data: &[f64]) -> Result<()> {
        let fail = |check: String| Err(LabError::InvalidWeights { check });
        if n == 0 {
            return fail("matrix must have at least one row".into());
        }
        if data.len() != n * n {
            return fail(format!("expected {} entries, got {}", n * n, data.len()));
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return fail(format!("entry ({}, {}) is not finite", idx / n, idx % n));
            }
            if v < 0.0 {
                return fail(format!("nonnegativity: entry ({}, {}) = {v}", idx / n, idx % n));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > WEIGHT_TOL {
                    return fail(format!("symmetry: w[{i}][{j}] = {a} but w[{j}][{i}] = {b}"));
                }
            }
        }
        for i in 0..n {
            let s: f64 = data[i * n..(i + 1) * n].iter().sum();
            if (s - 1.0).abs() > WEIGHT_TOL {
                return fail(format!("row-stochasticity: row {i} sums to {s}"));
            }
        }
        Ok(())
    }
}

/// Metropolis weights `1/(1 + max(deg_i, deg_j))` on edges, remainder on the
/// diagonal.
pub fn metropolis_weights(g: &Graph) -> WeightMatrix {
    let n = g.n();
    let deg = g.degrees();
    let mut data = vec![0.0; n * n];
    for (a, b) in g.edges() {
        let w = 1.0 / (1.0 + deg[a].max(deg[b]) as f64);
        data[a * n + b] = w;
        data[b * n + a] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| data[i * n + j]).sum();
        data[i * n + i] = 1.0 - off;
    }
    WeightMatrix { n, data }
}

/// Wraps an explicit matrix after checking every invariant.
pub fn custom_weights(n: usize, entries: &[Vec<f64>]) -> Result<WeightMatrix> {
    if entries.len() != n || entries.iter().any(|r| r.len() != n) {
        return Err(LabError::InvalidWeights {
            check: format!("shape: expected {n}x{n}"),
        });
    }
    let data: Vec<f64> = entries.iter().flatten().copied().collect();
    WeightMatrix::validate(n, &data)?;
    Ok(WeightMatrix { n, data })
}

/// `W' = ((1+eta)/2) I + ((1-eta)/2) W`, built the way a node would: scale the
/// off-diagonal weights and put the remainder on the diagonal.
pub fn safeguard_weights(w: &WeightMatrix, eta: f64) -> Result<WeightMatrix> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid("eta", format!("{eta} not in (0, 1)")));
    }
    let n = w.n();
    let scale = 0.5 * (1.0 - eta);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                let v = scale * w.get(i, j);
                data[i * n + j] = v;
                off += v;
            }
        }
        data[i * n + i] = 1.0 - off;
    }
    Ok(WeightMatrix { n, data })
}

/// Eigen-summary of a weight matrix.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// Eigenvalues sorted by increasing modulus.
    pub eigenvalues: Vec<f64>,
    /// Modulus of the second largest (in modulus) eigenvalue; 0 when n = 1.
    pub mu: f64,
    pub lambda_min: f64,
    /// `1 - mu`.
    pub gap: f64,
    eigenvectors: DMatrix<f64>,
}

impl SpectralInfo {
    /// Assumption (a): `mu < 1`.
    pub fn assumption_1a(&self) -> bool {
        self.mu < 1.0 - WEIGHT_TOL
    }

    /// Assumption (b): `W >= eta I`.
    pub fn assumption_1b(&self, eta: f64) -> bool {
        self.lambda_min >= eta - WEIGHT_TOL
    }

    /// Orthonormal eigenvectors, columns ordered like `eigenvalues`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn has_unit_eigenvalue(&self) -> bool {
        self.eigenvalues.iter().any(|&l| (l - 1.0).abs() <= 1e-10)
    }
}

pub fn spectral(w: &WeightMatrix) -> SpectralInfo {
    let eig = SymmetricEigen::new(w.to_dmatrix());
    let n = w.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let mu = if n == 1 { 0.0 } else { eigenvalues[n - 2].abs().min(1.0) };
    let lambda_min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    SpectralInfo {
        eigenvalues,
        mu,
        lambda_min,
        gap: 1.0 - mu,
        eigenvectors,
    }
}

/// Spectral norm (largest singular value) of a dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Plain-text network description: graph edge list plus the dense weight
/// matrix, row-major, 17 significant digits.
///
/// ```text
/// # nestlab network v1
/// nodes 3
/// edges 2
/// 0 1
/// 1 2
/// weights
/// <n lines of n values>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub graph: Graph,
    pub weights: WeightMatrix,
}

impl NetworkFile {
    pub const HEADER: &'static str = "# nestlab network v1";

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::HEADER);
        let _ = writeln!(s, "nodes {}", self.graph.n());
        let _ = writeln!(s, "edges {}", self.graph.edge_count());
        for (a, b) in self.graph.edges() {
            let _ = writeln!(s, "{a} {b}");
        }
        let _ = writeln!(s, "weights");
        for i in 0..self.weights.n() {
            let row: Vec<String> = self.weights.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: &str| LabError::Parse {
            line,
            message: message.to_string(),
        };
        let mut next = || lines.next();

        let (ln, header) = next().ok_or_else(|| err(0, "empty input"))?;
        if header != Self::HEADER {
            return Err(err(ln, "missing header"));
        }
        let mut keyed = |key: &str| -> Result<usize> {
            let (ln, l) = next().ok_or_else(|| err(0, "unexpected end of input"))?;
            l.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| err(ln, &format!("expected `{key} <count>`")))
        };
        let n = keyed("nodes")?;
        let m = keyed("edges")?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, l) = next().ok_or_else(|| err(0, "missing edge line"))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(ln, "bad edge endpoint")))
                .collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(err(ln, "edge lines hold two indices"));
            }
            edges.push((v[0], v[1]));
        }
        let graph = Graph::new(n, edges)?;
        let (ln, l) = next().ok_or_else(|| err(0, "missing weights section"))?;
        if l != "weights" {
            return Err(err(ln, "expected `weights`"));
        }
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, l) = next().ok_or_else(|| err(0, "missing weight row"))?;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(ln, "bad weight value")))
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        let weights = custom_weights(n, &rows)?;
        Ok(Self { graph, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn metropolis_two_node_path() {
        let w = metropolis_weights(&Graph::path(2));
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(w.get(i, j), 0.5, 1e-15));
            }
        }
    }

    #[test]
    fn metropolis_three_node_path() {
        let w = metropolis_weights(&Graph::path(3));
        assert!(close(w.get(0, 1), 1.0 / 3.0, 1e-15));
        assert!(close(w.get(1, 2), 1.0 / 3.0, 1e-15));
        assert!(close(w.get(0, 0), 2.0 / 3.0, 1e-15));
        assert!(close(w.get(1, 1), 1.0 / 3.0, 1e-15));
        assert!(close(w.get(2, 2), 2.0 / 3.0, 1e-15));
        assert_eq!(w.get(0, 2), 0.0);
    }

    #[test]
    fn metropolis_complete_three() {
        let w = metropolis_weights(&Graph::complete(3));
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(w.get(i, j), 1.0 / 3.0, 1e-15));
            }
        }
    }

    #[test]
    fn custom_weights_accepts_and_rejects() {
        assert!(custom_weights(2, &[vec![0.875, 0.125], vec![0.125, 0.875]]).is_ok());
        assert!(custom_weights(2, &[vec![0.1, 0.9], vec![0.9, 0.1]]).is_ok());
        let err = custom_weights(2, &[vec![0.6, 0.5], vec![0.5, 0.6]]).unwrap_err();
        match err {
            LabError::InvalidWeights { check } => assert!(check.contains("row-stochasticity"), "{check}"),
            other => panic!("unexpected {other:?}"),
        }
        let err = custom_weights(2, &[vec![0.5, 0.5], vec![0.4, 0.6]]).unwrap_err();
        assert!(matches!(err, LabError::InvalidWeights { ref check } if check.contains("symmetry")));
        let err = custom_weights(2, &[vec![1.5, -0.5], vec![-0.5, 1.5]]).unwrap_err();
        assert!(matches!(err, LabError::InvalidWeights { ref check } if check.contains("nonnegativity")));
    }

    #[test]
    fn safeguard_examples() {
        let w = WeightMatrix::two_node(0.5).unwrap();
        let s = safeguard_weights(&w, 0.1).unwrap();
        assert!(close(s.get(0, 0), 0.775, 1e-15));
        assert!(close(s.get(0, 1), 0.225, 1e-15));
        let id = WeightMatrix::identity(4);
        assert_eq!(safeguard_weights(&id, 0.3).unwrap(), id);
        let bad = WeightMatrix::two_node(0.9).unwrap();
        let s = safeguard_weights(&bad, 0.1).unwrap();
        assert!(spectral(&s).lambda_min >= 0.1 - 1e-12);
        assert!(safeguard_weights(&w, 1.0).is_err());
    }

    #[test]
    fn spectral_examples() {
        let sp = spectral(&WeightMatrix::two_node(0.125).unwrap());
        assert!(close(sp.eigenvalues[0], 0.75, 1e-14));
        assert!(close(sp.eigenvalues[1], 1.0, 1e-14));
        assert!(close(sp.mu, 0.75, 1e-14));

        let sp = spectral(&WeightMatrix::two_node(0.9).unwrap());
        assert!(close(sp.eigenvalues[0], -0.8, 1e-14));
        assert!(close(sp.mu, 0.8, 1e-14));
        assert!(!sp.assumption_1b(0.01));
        assert!(sp.assumption_1a());

        let sp = spectral(&WeightMatrix::identity(1));
        assert_eq!(sp.mu, 0.0);
        assert_eq!(sp.gap, 1.0);
    }

    #[test]
    fn connectivity() {
        assert!(is_connected(&Graph::path(2)));
        assert!(!is_connected(&Graph::new(2, []).unwrap()));
        assert!(is_connected(&Graph::path(3)));
        assert!(!is_connected(&Graph::new(4, [(0, 1), (2, 3)]).unwrap()));
    }

    #[test]
    fn disconnected_metropolis_has_mu_one() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let sp = spectral(&metropolis_weights(&g));
        assert!(!sp.assumption_1a());
    }

    #[test]
    fn graph_rejects_defects() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn geometric_examples() {
        let g = generate_geometric(2, 1.0, 11).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 1));

        let g = generate_geometric(100, 0.10, 7).unwrap();
        assert!(is_connected(&g));
        assert!((445..=545).contains(&g.edge_count()), "{}", g.edge_count());
        assert!((g.relative_degree() - 0.10).abs() <= 0.01);

        let g = generate_geometric(20, 0.32, 3).unwrap();
        assert!(is_connected(&g));
        assert!((59..=63).contains(&g.edge_count()), "{}", g.edge_count());
    }

    #[test]
    fn geometric_is_reproducible() {
        let a = generate_geometric(40, 0.2, 99).unwrap();
        let b = generate_geometric(40, 0.2, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometric_rejects_sub_tree_density() {
        assert!(matches!(
            generate_geometric(50, 0.01, 1),
            Err(LabError::InfeasibleDensity { .. })
        ));
    }

    #[test]
    fn network_file_round_trip() {
        let g = generate_geometric(12, 0.4, 5).unwrap();
        let file = NetworkFile {
            weights: metropolis_weights(&g),
            graph: g,
        };
        let text = file.to_text();
        let back = NetworkFile::parse(&text).unwrap();
        assert_eq!(back, file);
        assert!(NetworkFile::parse("nodes 2").is_err());
    }
}
