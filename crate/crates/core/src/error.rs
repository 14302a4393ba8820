use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An image or map of the wrong kind was supplied (e.g. 1-channel where 3 are required).
    #[error("type error: {0}")]
    Type(String),

    /// Inputs violate a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// The map is constant, so a z-score or correlation is undefined.
    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
