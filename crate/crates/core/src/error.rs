use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure classes; the CLI maps each one to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    Validation,
    Convergence,
    Statistical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no edges")]
    NoEdges,

    #[error("empty graph")]
    EmptyGraph,

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("no recurrent core: the extended strongly connected component is empty")]
    NoRecurrentCore,

    #[error("internal consistency error: {0}")]
    Inconsistent(String),

    #[error("row {row} has zero mass inside the block")]
    ZeroRowSum { row: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e}){hint}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        hint: &'static str,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no exit in stationary mean: pi_bar D 1 = {0:e}")]
    NoExit(f64),

    #[error("survival probability at horizon is zero for node {node}")]
    DeadNode { node: usize },

    #[error("no walk survived {horizon} steps out of {samples} samples; use more samples or a smaller horizon")]
    NoSurvivors { samples: u64, horizon: usize },

    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: usize, right: usize },

    #[error("degenerate ranking: every pair is tied")]
    DegenerateRanking,

    #[error("at damping {c}: {source}")]
    AtDamping { c: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::NoEdges | Error::Io(_) | Error::Json(_) => ErrorKind::Parse,
            Error::NotConverged { .. } => ErrorKind::Convergence,
            Error::NoSurvivors { .. } => ErrorKind::Statistical,
            Error::AtDamping { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }
}
