use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a documented constraint (non-positive rate, bad grid size, ...).
    #[error("{0}")]
    Validation(String),

    /// Input outside the domain of a function (negative density in a log, t < 0, ...).
    #[error("{0}")]
    Domain(String),

    #[error("{0}")]
    Geometry(String),

    #[error("non-finite value in {field} at t={t}")]
    BlowUp { t: f64, field: &'static str },

    #[error("{0}")]
    Fit(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Precondition(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used for the `ERROR:<category>:` prefix
    /// printed by the command-line tool.
    pub fn category(&self) -> &'static str {
        match self {
            Self::Validation(_) => "validation",
            Self::Domain(_) => "domain",
            Self::Geometry(_) => "geometry",
            Self::BlowUp { .. } => "blowup",
            Self::Fit(_) => "fit",
            Self::Parse { .. } => "parse",
            Self::Precondition(_) => "precondition",
            Self::Io { .. } => "io",
        }
    }

    /// True for errors caused by bad user input rather than by the computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Self::Validation(_) | Self::Domain(_) | Self::Parse { .. } | Self::Precondition(_)
        )
    }
}
