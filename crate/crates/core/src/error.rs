use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("cannot parse {value:?} as a number at row {row}, column {column:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("input is empty")]
    EmptyInput,

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("input vector is not strictly increasing at position {index}")]
    NonMonotone { index: usize },

    #[error("input vector needs at least {min} entries, got {len}")]
    TooShort { min: usize, len: usize },

    #[error("feature {0} is not active")]
    FeatureNotActive(usize),

    #[error("labels must contain both classes")]
    SingleClass,

    #[error("subsample is empty")]
    EmptySubsample,

    #[error("model file error: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
