//! Errors of the IO layer and the command-line tool.

use std::path::PathBuf;

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Anything that can go wrong outside the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Failure reported by the numerical core.
    #[error(transparent)]
    Core(#[from] jhat_core::Error),
    /// File could not be opened, read or written.
    #[error("{path}: {source}")]
    Io {
        /// Offending file.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Malformed delimited file.
    #[error("{path}: line {line}: {message}")]
    Parse {
        /// Offending file.
        path: PathBuf,
        /// 1-based line number; the header is line 1.
        line: u64,
        /// What was wrong.
        message: String,
    },
    /// Malformed model, report or configuration document.
    #[error("{path}: {message}")]
    Document {
        /// Offending file.
        path: PathBuf,
        /// What was wrong.
        message: String,
    },
    /// Inconsistent command-line usage.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(e) => match e {
                jhat_core::Error::Shape { .. } => "shape",
                jhat_core::Error::NonFinite { .. } => "non_finite",
                jhat_core::Error::InvalidArgument { .. } => "invalid_argument",
                jhat_core::Error::EmptyBatch => "empty_batch",
                jhat_core::Error::EmptySample => "empty_sample",
                jhat_core::Error::NoTrainingPairs { .. } => "no_training_pairs",
                jhat_core::Error::NonFiniteGradient { .. } => "non_finite_gradient",
                jhat_core::Error::NonFiniteLoss { .. } => "non_finite_loss",
                jhat_core::Error::UnknownFunction(_) => "unknown_function",
                jhat_core::Error::OutsideDomain { .. } => "outside_domain",
                jhat_core::Error::SingularPoint { .. } => "singular_point",
                jhat_core::Error::EmptyFilteredSet { .. } => "empty_filtered_set",
                jhat_core::Error::SingularMatrix => "singular_matrix",
                jhat_core::Error::MissingConstants(_) => "missing_constants",
            },
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Document { .. } => "document",
            Error::Usage(_) => "usage",
        }
    }

    /// One-line JSON object `{"error": kind, "message": text}`.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn document(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Document {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
