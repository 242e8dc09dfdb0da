use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("domain error in column `{column}`: {message}")]
    Domain { column: String, message: String },

    #[error("parse error at row {row}, column `{column}`: cannot read `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Domain {
            column: column.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the input data rather than by configuration
    /// or by the numerical routines.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Parse { .. } | Error::Io(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
