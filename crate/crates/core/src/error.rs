use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("self-loop at node {}", .0 + 1)]
    SelfLoop(usize),
    #[error("node {node} out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid block assignment: {0}")]
    InvalidAssignment(String),
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("block {0} has a single node; its within-block probability is undefined")]
    SingletonBlock(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("maximum likelihood estimate does not exist: {0}")]
    MleNonexistence(String),
    #[error("expected count is zero but {observed} was observed ({context})")]
    ZeroExpected { observed: f64, context: String },
    #[error("move is not applicable: {0}")]
    InapplicableMove(String),
    #[error("graph too large for exhaustive enumeration ({dyads} dyads, limit {limit})")]
    TooLarge { dyads: usize, limit: usize },
    #[error("estimator failure: {0}")]
    Estimator(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
