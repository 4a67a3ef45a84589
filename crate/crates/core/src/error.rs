use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no token reaches the document-frequency threshold min_df={min_df}")]
    AllTokensPruned { min_df: usize },

    #[error("split `{split}` would be empty ({docs} documents, fractions {fractions:?})")]
    EmptySplit {
        split: &'static str,
        docs: usize,
        fractions: [f64; 3],
    },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("domain error in {op}: {detail}")]
    DomainError { op: &'static str, detail: String },

    #[error("cannot differentiate a {rows}x{cols} output; backward needs a scalar")]
    NotScalar { rows: usize, cols: usize },

    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config key `{key}`: {detail}")]
    Config { key: String, detail: String },

    #[error("{failed} of {total} sweep runs failed; see {path}")]
    SweepIncomplete { failed: usize, total: usize, path: PathBuf },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: total loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("corrupt checkpoint {path}: {detail}")]
    CorruptCheckpoint { path: PathBuf, detail: String },

    #[error("corrupt corpus cache {path}: {detail}")]
    CorruptCache { path: PathBuf, detail: String },

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
