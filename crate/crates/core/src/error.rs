use std::path::PathBuf;

/// Errors raised by the library stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument or input value is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A CSV header does not match the expected layout.
    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    /// A data row could not be parsed or violates a record invariant.
    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: u64,
        message: String,
    },

    /// Preprocessing left nothing to work with.
    #[error("dataset is empty after preprocessing")]
    EmptyDataset,

    /// Two pieces of data that should agree do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
