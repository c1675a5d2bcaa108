use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration, unreadable or malformed input.
    Input,
    /// Numerical failure or a consistency check that did not hold.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("zone {zone} does not overlap the grid extent")]
    EmptyOverlay { zone: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{} not found", .0.display())]
    NotFound(PathBuf),

    /// An input named in the run configuration does not exist.
    #[error("{role} file not found: {}", .path.display())]
    MissingInput { role: String, path: PathBuf },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("emission factor set `{set}` is missing {class}/{pollutant}")]
    MissingFactor {
        set: String,
        class: String,
        pollutant: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("singular design: column(s) {columns:?} are collinear")]
    SingularDesign { columns: Vec<String> },

    #[error("complete or quasi-complete separation detected after {iterations} iteration(s)")]
    Separation { iterations: usize },

    #[error("{0} did not converge")]
    NotConverged(String),

    #[error("insufficient observations: n = {n}, k = {k}")]
    Insufficient { n: usize, k: usize },

    #[error("conservation check failed: {0}")]
    Conservation(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularDesign { .. }
            | Error::Separation { .. }
            | Error::NotConverged(_)
            | Error::Insufficient { .. }
            | Error::Conservation(_) => ErrorKind::Numerical,
            _ => ErrorKind::Input,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
