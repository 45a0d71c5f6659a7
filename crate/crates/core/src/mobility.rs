//! Mobility networks: region graphs, CTMC generator matrices, stationary
//! distributions and the state-dependent mobility Laplacian `L(x)`.
//!
//! A generator `Q` holds the instantaneous transition rate `q_ij` from
//! region `i` to region `j` off the diagonal and `-nu_i` (the total exit
//! rate) on the diagonal, so every row sums to zero.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;

/// Tolerance on the row sums of a generator supplied from outside.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on `sum(x) = 1` for a population distribution.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Directed graph over regions `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl RegionGraph {
    /// Builds a graph from 0-based directed edges. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        let mut seen = vec![false; n * n];
        for &(from, to) in &edges {
            if from >= n || to >= n {
                return Err(Error::InvalidEdge {
                    from,
                    to,
                    reason: "endpoint out of range",
                });
            }
            if from == to {
                return Err(Error::InvalidEdge {
                    from,
                    to,
                    reason: "self-loop",
                });
            }
            if std::mem::replace(&mut seen[from * n + to], true) {
                return Err(Error::InvalidEdge {
                    from,
                    to,
                    reason: "duplicate edge",
                });
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(from, _) in &self.edges {
            deg[from] += 1;
        }
        deg
    }

    fn contains(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_unreciprocated().is_none()
    }

    fn first_unreciprocated(&self) -> Option<(usize, usize)> {
        self.edges.iter().copied().find(|&(from, to)| !self.contains(to, from))
    }

    /// Strong connectivity of the edge set.
    pub fn is_strongly_connected(&self) -> bool {
        strongly_connected(self.n, |i| {
            self.edges
                .iter()
                .filter(move |&&(from, _)| from == i)
                .map(|&(_, to)| to)
        })
    }
}

/// Topologies used by the figure scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Line,
    Ring,
    Star,
    Complete,
}

impl GraphKind {
    pub const ALL: [GraphKind; 4] = [Self::Line, Self::Ring, Self::Star, Self::Complete];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Line => "line",
            Self::Ring => "ring",
            Self::Star => "star",
            Self::Complete => "complete",
        }
    }

    fn min_nodes(self) -> usize {
        match self {
            // A 2-cycle would duplicate the single edge pair.
            Self::Ring => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown graph kind `{s}`"))
    }
}

/// Bidirectional edge set of the named topology. Node 0 is the star hub.
pub fn make_graph(kind: GraphKind, n: usize) -> Result<RegionGraph> {
    if n < kind.min_nodes() {
        return Err(Error::TooFewNodes {
            kind: kind.to_string(),
            n,
            min: kind.min_nodes(),
        });
    }
    let mut edges = Vec::new();
    let mut both = |a: usize, b: usize| {
        edges.push((a, b));
        edges.push((b, a));
    };
    match kind {
        GraphKind::Line => (0..n - 1).for_each(|i| both(i, i + 1)),
        GraphKind::Ring => (0..n).for_each(|i| both(i, (i + 1) % n)),
        GraphKind::Star => (1..n).for_each(|j| both(0, j)),
        GraphKind::Complete => {
            for i in 0..n {
                for j in i + 1..n {
                    both(i, j);
                }
            }
        }
    }
    RegionGraph::new(n, edges)
}

/// Validated CTMC generator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    q: DMatrix<f64>,
    // (j, q_ji) for every j with q_ji > 0, indexed by i.
    incoming: Vec<Vec<(usize, f64)>>,
    // (j, q_ij) for every j with q_ij > 0, indexed by i.
    outgoing: Vec<Vec<(usize, f64)>>,
}

impl GeneratorMatrix {
    /// Checks the sign pattern and row sums of `q`.
    ///
    /// Row sums must vanish to within `1e-12` relative to the exit rate; the
    /// stored diagonal is then reset to `-sum_{j != i} q_ij` so the rows of
    /// the validated matrix sum to zero as constructed.
    pub fn validate(q: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = q.shape();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        for row in 0..rows {
            for col in 0..cols {
                let value = q[(row, col)];
                if !value.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
                if row != col && value < 0.0 {
                    return Err(Error::NegativeOffDiagonal { row, col });
                }
            }
        }
        for i in 0..rows {
            let sum: f64 = q.row(i).iter().sum();
            let exit = off_diagonal_row_sum(&q, i);
            if sum.abs() > ROW_SUM_TOL * exit.max(1.0) {
                return Err(Error::NonzeroRowSum { row: i, sum });
            }
        }
        Ok(Self::from_off_diagonal(q))
    }

    /// Builds from a matrix whose off-diagonal entries are already known to
    /// be valid rates; the diagonal is overwritten.
    fn from_off_diagonal(mut q: DMatrix<f64>) -> Self {
        let n = q.nrows();
        for i in 0..n {
            q[(i, i)] = -off_diagonal_row_sum(&q, i);
        }
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && q[(i, j)] > 0.0 {
                    outgoing[i].push((j, q[(i, j)]));
                    incoming[j].push((i, q[(i, j)]));
                }
            }
        }
        Self { q, incoming, outgoing }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[(from, to)]
    }

    /// Total exit rate `nu_i = -q_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[(i, i)]
    }

    pub fn exit_rates(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.exit_rate(i))
    }

    /// `(j, q_ij)` for each destination reachable from `i` in one jump.
    pub fn outgoing(&self, i: usize) -> &[(usize, f64)] {
        &self.outgoing[i]
    }

    /// `(j, q_ji)` for each source with a positive rate into `i`.
    pub fn incoming(&self, i: usize) -> &[(usize, f64)] {
        &self.incoming[i]
    }

    /// Edge set of strictly positive off-diagonal rates.
    pub fn graph(&self) -> RegionGraph {
        let edges = (0..self.n())
            .flat_map(|i| self.outgoing[i].iter().map(move |&(j, _)| (i, j)))
            .collect();
        RegionGraph::new(self.n(), edges).expect("generator edges are valid")
    }

    /// True iff the digraph of positive off-diagonal rates is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        strongly_connected(self.n(), |i| self.outgoing[i].iter().map(|&(j, _)| j))
    }

    pub fn ensure_irreducible(&self) -> Result<()> {
        if self.is_irreducible() {
            Ok(())
        } else {
            Err(Error::NotIrreducible)
        }
    }

    /// Row-major CSV of the full matrix.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.q)
    }

    pub fn to_document(&self) -> GraphDocument {
        let graph = self.graph();
        GraphDocument {
            n: self.n(),
            edges: graph.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            rates: Some(
                graph
                    .edges()
                    .iter()
                    .map(|&(i, j)| RateEntry(i + 1, j + 1, self.q[(i, j)]))
                    .collect(),
            ),
        }
    }
}

fn off_diagonal_row_sum(q: &DMatrix<f64>, i: usize) -> f64 {
    q.row(i)
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, v)| v)
        .sum()
}

/// `validate_generator` in operation form.
pub fn validate_generator(q: DMatrix<f64>) -> Result<GeneratorMatrix> {
    GeneratorMatrix::validate(q)
}

pub fn is_irreducible(g: &GeneratorMatrix) -> bool {
    g.is_irreducible()
}

fn strongly_connected<F, I>(n: usize, successors: F) -> bool
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut forward = vec![Vec::new(); n];
    let mut reverse = vec![Vec::new(); n];
    for (i, out) in forward.iter_mut().enumerate() {
        for j in successors(i) {
            out.push(j);
            reverse[j].push(i);
        }
    }
    reaches_all(&forward) && reaches_all(&reverse)
}

fn reaches_all(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adjacency[i] {
            if !std::mem::replace(&mut seen[j], true) {
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `q_ij = nu_i / outdegree(i)` on every edge.
pub fn uniform_out_rates(g: &RegionGraph, nu: &[f64]) -> Result<GeneratorMatrix> {
    let n = g.n();
    if nu.len() != n {
        return Err(Error::DimensionMismatch {
            what: "nu",
            expected: n,
            found: nu.len(),
        });
    }
    if let Some(i) = nu.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("exit rate of node {i} must be positive, got {}", nu[i]),
        });
    }
    let degree = g.out_degrees();
    if let Some(node) = degree.iter().position(|&d| d == 0) {
        return Err(Error::IsolatedNode { node });
    }
    let mut q = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        q[(i, j)] = nu[i] / degree[i] as f64;
    }
    Ok(GeneratorMatrix::from_off_diagonal(q))
}

/// Reversible generator whose stationary distribution is `target`.
///
/// Proposals pick a uniform neighbour at total rate `base_rate`; a move
/// `i -> j` is accepted with probability
/// `min(1, target_j d_i / (target_i d_j))`, `d` being the degree. Hence
/// `target_i q_ij = base_rate * min(target_i / d_i, target_j / d_j)`, which
/// is symmetric in `i, j` (detailed balance).
pub fn metropolis_hastings_rates(
    g: &RegionGraph,
    target: &PopulationDistribution,
    base_rate: f64,
) -> Result<GeneratorMatrix> {
    let n = g.n();
    if target.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target",
            expected: n,
            found: target.len(),
        });
    }
    if !(base_rate > 0.0 && base_rate.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "base_rate",
            reason: format!("must be positive, got {base_rate}"),
        });
    }
    if let Some((from, to)) = g.first_unreciprocated() {
        return Err(Error::AsymmetricGraph { from, to });
    }
    let degree = g.out_degrees();
    if let Some(node) = degree.iter().position(|&d| d == 0) {
        return Err(Error::IsolatedNode { node });
    }
    let t = target.as_slice();
    let mut q = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        let (di, dj) = (degree[i] as f64, degree[j] as f64);
        let acceptance = ((t[j] * di) / (t[i] * dj)).min(1.0);
        q[(i, j)] = base_rate * acceptance / di;
    }
    Ok(GeneratorMatrix::from_off_diagonal(q))
}

/// Strictly positive vector on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationDistribution(DVector<f64>);

impl PopulationDistribution {
    pub fn new(x: DVector<f64>) -> Result<Self> {
        Self::with_tolerance(x, SIMPLEX_TOL)
    }

    /// As [`new`](Self::new) with a caller-chosen tolerance on the sum.
    pub fn with_tolerance(x: DVector<f64>, tol: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        if let Some(index) = x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::ZeroPopulationEntry { index });
        }
        let sum = x.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self(x))
    }

    /// `1/n` everywhere.
    pub fn uniform(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0 / n as f64))
    }

    /// Rescales a strictly positive vector to sum to one.
    pub fn normalized(x: DVector<f64>) -> Result<Self> {
        if let Some(index) = x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::ZeroPopulationEntry { index });
        }
        let sum = x.sum();
        Self::new(x / sum)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Unique `v` with `Q^T v = 0`, `sum(v) = 1`.
///
/// Solved directly: the last equation of `Q^T v = 0` is redundant for an
/// irreducible `Q`, so it is replaced by the normalisation `1^T v = 1` and the
/// square system is factorised by LU. One step of iterative refinement
/// follows.
pub fn stationary_distribution(g: &GeneratorMatrix) -> Result<PopulationDistribution> {
    g.ensure_irreducible()?;
    let n = g.n();
    let mut system = g.q.transpose();
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;

    let lu = system.clone().lu();
    let mut v = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    let correction = lu.solve(&(&rhs - &system * &v)).ok_or(Error::SingularSystem)?;
    v += correction;

    if let Some(index) = v.iter().position(|&vi| vi <= 0.0) {
        // Perron-Frobenius rules this out for irreducible Q.
        return Err(Error::ZeroPopulationEntry { index });
    }
    let sum = v.sum();
    PopulationDistribution::new(v / sum)
}

/// State-dependent Laplacian `L(x)` coupling infected fractions through
/// population flows.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityLaplacian(DMatrix<f64>);

impl MobilityLaplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// `l_ij = -q_ji x_j / x_i` off the diagonal, `l_ii = sum_{j != i} q_ji x_j / x_i`.
pub fn mobility_laplacian(g: &GeneratorMatrix, x: &[f64]) -> Result<MobilityLaplacian> {
    let n = g.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "x",
            expected: n,
            found: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|&xi| !(xi > 0.0)) {
        return Err(Error::ZeroPopulationEntry { index });
    }
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diagonal = 0.0;
        for &(j, q_ji) in g.incoming(i) {
            let flow = q_ji * x[j] / x[i];
            l[(i, j)] = -flow;
            diagonal += flow;
        }
        l[(i, i)] = diagonal;
    }
    Ok(MobilityLaplacian(l))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        out.push_str(&format::csv_row(row.iter().copied()));
        out.push('\n');
    }
    out
}

/// JSON document for graphs and generators, 1-based:
/// `{ "n": 3, "edges": [[1,2],...], "rates": [[1,2,0.1],...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<RateEntry>>,
}

/// `[i, j, q_ij]` with 1-based node indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEntry(pub usize, pub usize, pub f64);

impl GraphDocument {
    pub fn from_graph(g: &RegionGraph) -> Self {
        Self {
            n: g.n(),
            edges: g.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            rates: None,
        }
    }

    fn zero_based(n: usize, i: usize, j: usize) -> Result<(usize, usize)> {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::InvalidEdge {
                from: i,
                to: j,
                reason: "1-based index out of range",
            });
        }
        Ok((i - 1, j - 1))
    }

    pub fn graph(&self) -> Result<RegionGraph> {
        let edges = self
            .edges
            .iter()
            .map(|&[i, j]| Self::zero_based(self.n, i, j))
            .collect::<Result<Vec<_>>>()?;
        RegionGraph::new(self.n, edges)
    }

    /// Generator from the explicit rates. Every rate must sit on a listed edge
    /// and every edge must carry a positive rate.
    pub fn generator(&self) -> Result<GeneratorMatrix> {
        let graph = self.graph()?;
        let rates = self.rates.as_ref().ok_or(Error::InvalidParameter {
            name: "rates",
            reason: "document has no rates".to_owned(),
        })?;
        let n = self.n;
        let mut q = DMatrix::zeros(n, n);
        for &RateEntry(i, j, rate) in rates {
            let (a, b) = Self::zero_based(n, i, j)?;
            if !graph.contains(a, b) {
                return Err(Error::InvalidEdge {
                    from: i,
                    to: j,
                    reason: "rate given for an edge not in the edge list",
                });
            }
            if !rate.is_finite() {
                return Err(Error::NonFinite { row: a, col: b });
            }
            if rate < 0.0 {
                return Err(Error::NegativeOffDiagonal { row: a, col: b });
            }
            q[(a, b)] = rate;
        }
        if let Some(&(a, b)) = graph.edges().iter().find(|&&(a, b)| q[(a, b)] <= 0.0) {
            return Err(Error::InvalidEdge {
                from: a + 1,
                to: b + 1,
                reason: "edge has no positive rate",
            });
        }
        Ok(GeneratorMatrix::from_off_diagonal(q))
    }
}
