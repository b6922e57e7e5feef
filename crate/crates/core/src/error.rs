use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("softmax row {row} is fully masked")]
    DegenerateRow { row: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed dependency tree at token {token}: {reason}")]
    MalformedTree { token: usize, reason: String },

    #[error("a dependency-distance head needs a dependency tree, none was given")]
    MissingTree,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: sentence {sentence}, line {line}: {msg}")]
    Parse {
        path: String,
        sentence: usize,
        line: usize,
        msg: String,
    },

    #[error("token id {id} out of range for table with {rows} rows")]
    IdOutOfRange { id: usize, rows: usize },

    #[error("loss became non-finite at epoch {epoch}, step {step}; first non-finite tensor: {tensor}")]
    Diverged { epoch: usize, step: usize, tensor: String },

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("malformed checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    /// Errors caused by bad user input (configs, corpora) rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::MalformedTree { .. }
                | Error::MissingTree
                | Error::Empty(_)
                | Error::Json(_)
                | Error::Checkpoint { .. }
        )
    }
}
