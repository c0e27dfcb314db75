use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate spectrum: top eigenvalues {first} and {second} are tied")]
    DegenerateSpectrum { first: f64, second: f64 },

    #[error("training diverged at epoch {epoch} (non-finite loss or parameters)")]
    TrainingDiverged { epoch: usize },

    #[error("unlearning method `{method}` diverged at step {step}")]
    UnlearningDiverged { method: String, step: usize },

    #[error("{kind} member {model_id} (seed {seed}) failed: {source}")]
    MemberFailed {
        kind: String,
        model_id: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("method `{0}` is already registered")]
    DuplicateMethod(String),

    #[error("{what} not found; available: [{}]", available.join(", "))]
    NotFound {
        what: String,
        available: Vec<String>,
    },

    #[error("corrupt artifact {path}: expected digest {expected}, found {found}")]
    Corruption {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("malformed artifact {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("manifest format version {found} is not supported (supported: {supported}); re-run with --force to regenerate")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
