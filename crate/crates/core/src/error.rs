use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KinError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KinError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("labels must contain both classes")]
    SingleClass,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid patch selection: {0}")]
    InvalidSelection(String),

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("duplicate family id `{0}`")]
    DuplicateFamily(String),

    #[error("family `{family_id}` is missing its {member}")]
    MissingMember {
        family_id: String,
        member: &'static str,
    },

    #[error("invalid fold plan: {0}")]
    FoldPlan(String),

    #[error("need at least {needed} families, got {got}")]
    TooFewFamilies { needed: usize, got: usize },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("cannot decode model: {0}")]
    Decode(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KinError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KinError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KinError::Io {
            path: path.into(),
            source,
        }
    }
}
