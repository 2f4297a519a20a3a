use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),

    #[error("wav decode error: {field} {detail}")]
    WavDecode { field: &'static str, detail: String },

    #[error("wav encode error: {0}")]
    WavEncode(String),

    #[error("clip too short: {len} samples, need at least {needed}")]
    ClipTooShort { len: usize, needed: usize },

    #[error("degenerate features: zero-norm feature vector")]
    DegenerateFeatures,

    #[error("zero power: {0}")]
    ZeroPower(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("manifest error at line {line}: {detail}")]
    Manifest { line: usize, detail: String },

    #[error("record error at line {line}: {detail}")]
    Record { line: usize, detail: String },

    #[error("report mismatch: {0}")]
    ReportMismatch(String),

    #[error("empty manifest")]
    EmptyManifest,

    #[error("label {0} out of range")]
    LabelOutOfRange(usize),

    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("query budget of {budget} exhausted")]
    BudgetExhausted { budget: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema validation failed: {0}")]
    Schema(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
