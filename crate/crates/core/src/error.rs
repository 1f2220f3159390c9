use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{0}: no triples")]
    NoTriples(PathBuf),

    #[error("unknown relation: {0}")]
    UnknownRelation(String),

    #[error("unknown entity: {0}")]
    UnknownEntity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "negative sampling exhausted for relation {relation:?}: \
         found {found} of {requested} after {attempts} attempts"
    )]
    NegativesExhausted {
        relation: String,
        requested: usize,
        found: usize,
        attempts: usize,
    },

    #[error("non-finite value in embedding training at epoch {epoch}; try a lower lr0 (was {lr0})")]
    EmbeddingDiverged { epoch: usize, lr0: f64 },

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("classifier diverged at iteration {iteration}: loss is {loss}")]
    ClassifierDiverged { iteration: usize, loss: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("nothing to evaluate: {0}")]
    NothingToEvaluate(String),

    #[error("leakage detected in {stage} for relation {relation:?}: {count} test positive(s) in training data")]
    Leakage {
        stage: &'static str,
        relation: String,
        count: usize,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
