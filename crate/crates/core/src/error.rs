use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Node and row indices carried by the variants are 0-based; the JSON
/// formats use 1-based indices and convert on the way in and out.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative off-diagonal rate in row {row} (column {col})")]
    NegativeOffDiagonal { row: usize, col: usize },

    #[error("row {row} sums to {sum:e}, expected 0")]
    NonzeroRowSum { row: usize, sum: f64 },

    #[error("generator is not irreducible (graph is not strongly connected)")]
    NotIrreducible,

    #[error("graph kind `{kind}` needs at least {min} nodes, got {n}")]
    TooFewNodes { kind: String, n: usize, min: usize },

    #[error("invalid edge ({from}, {to}): {reason}")]
    InvalidEdge {
        from: usize,
        to: usize,
        reason: &'static str,
    },

    #[error("node {node} has no outgoing edges")]
    IsolatedNode { node: usize },

    #[error("graph is not symmetric: edge ({from}, {to}) has no reverse")]
    AsymmetricGraph { from: usize, to: usize },

    #[error("target distribution entry {index} is not strictly positive")]
    ZeroTargetEntry { index: usize },

    #[error("population entry {index} is not strictly positive")]
    ZeroPopulationEntry { index: usize },

    #[error("population fractions sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Metzler: entry ({row}, {col}) is negative")]
    NotMetzler { row: usize, col: usize },

    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("L* + D is singular (all recovery rates are zero); R0 is undefined")]
    SingularMMatrix,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("not in the endemic regime: spectral abscissa {mu:e} <= 0")]
    NotEndemicRegime { mu: f64 },

    #[error("fixed point has a vanishing entry at node {index}")]
    DegenerateSolution { index: usize },

    #[error("equilibrium residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("p[{node}] = {value} left [0, 1] at t = {time}; reduce dt")]
    StateEscapedBox { time: f64, node: usize, value: f64 },

    #[error("step too large: per-individual event probability {probability} at node {node} exceeds 1")]
    StepTooLarge { node: usize, probability: f64 },

    #[error("replica {replica} does not share the sample grid")]
    GridMismatch { replica: usize },

    #[error("no curing rates satisfy the lambda2 condition: {0}")]
    Infeasible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
