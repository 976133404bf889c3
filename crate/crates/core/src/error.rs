use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Location of a problem inside a tabular input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    /// 1-based line number, header is line 1.
    pub row: usize,
    pub column: String,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:row {}:column '{}'", self.file, self.row, self.column)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {message} (last bracket [{lo}, {hi}])")]
    NoConvergence { message: String, lo: f64, hi: f64 },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: Location, message: String },

    #[error("ordering error at {location}: {message}")]
    Ordering { location: Location, message: String },

    #[error("value error at {location}: {message}")]
    Value { location: Location, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

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
}
