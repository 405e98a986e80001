use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("index {0} is not undecided at this node")]
    NotUndecided(usize),

    #[error("invalid node: {0}")]
    InvalidNode(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("screening pruned the node; it must be discarded, not restricted")]
    NodePruned,

    #[error("node has no undecided index to branch on")]
    NothingToBranch,

    #[error("exhaustive enumeration over n = {n} exceeds the limit of {limit}")]
    EnumerationTooLarge { n: usize, limit: usize },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
