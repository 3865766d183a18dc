use std::path::PathBuf;

use thiserror::Error;

use crate::planner::PlanningSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("matrix game solver did not terminate within {cap} pivots on {rows}x{cols} matrix {matrix:?}")]
    NumericFailure {
        rows: usize,
        cols: usize,
        cap: usize,
        matrix: Vec<Vec<f64>>,
    },

    #[error("matrix game equilibrium has duality gap {gap:e} above tolerance {tol:e}")]
    InaccurateEquilibrium { gap: f64, tol: f64 },

    /// The best iterate is kept so callers can inspect how far it got.
    #[error("value iteration did not converge after {} iterations (span of increments {span:e})", best.iterations)]
    NoConvergence {
        best: Box<PlanningSolution>,
        span: f64,
    },

    #[error("induced Markov chain has more than one recurrent class (rank {rank} < {expected})")]
    SingularChain { rank: usize, expected: usize },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid opponent spec: {0}")]
    InvalidSpec(String),

    #[error("runs do not share horizon/checkpoints: {0}")]
    MismatchedHorizon(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
