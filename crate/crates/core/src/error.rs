use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} belongs to more than one cluster")]
    OverlappingClusters { node: usize },
    #[error("node {node} is not covered by any cluster")]
    UncoveredNode { node: usize },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("node index {node} out of range (network has {nodes} nodes)")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("invalid activation parameters: {0}")]
    InvalidParams(String),
    #[error("invalid signal model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mean recursion is unstable (spectral radius {0:.6} >= 1)")]
    UnstableMean(f64),
    #[error("mean-square recursion is unstable (spectral radius {0:.6} >= 1)")]
    UnstableMeanSquare(f64),
    #[error("problem too large for the mean-square analysis: NL = {nl} exceeds guard {guard}")]
    ProblemTooLarge { nl: usize, guard: usize },
    #[error("weight matrix is not symmetric (max asymmetry {0:.3e})")]
    NonSymmetricWeight(f64),
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("invalid run settings: {0}")]
    InvalidRun(String),
}

pub type Result<T> = std::result::Result<T, Error>;
