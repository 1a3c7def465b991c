use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rejection sampler gave up after {attempts} attempts")]
    SamplerExhausted { attempts: u64 },

    #[error("no unseen architecture could be generated")]
    SpaceExhausted,

    #[error("path universe of {size} entries exceeds cap {cap}")]
    PathTableTooLarge { size: u128, cap: u128 },

    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),

    #[error("loss undefined: target {target} is not above the lower bound {lower_bound}")]
    LossDomain { target: f64, lower_bound: f64 },

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("requested {requested} of {available} candidates")]
    BatchSize { requested: usize, available: usize },

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("unknown architecture {0}")]
    UnknownArchitecture(String),

    #[error("query budget of {cap} exhausted (attempted query {attempted})")]
    BudgetExceeded { cap: usize, attempted: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot parse cell {text:?}: {message}")]
    CellSyntax { text: String, message: String },

    #[error("duplicate architecture {cell} on line {line}")]
    DuplicateKey { cell: String, line: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
