use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ShapeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("zero-area surface")]
    ZeroArea,

    #[error("isolated vertex {0}: no incident non-degenerate triangle")]
    IsolatedVertex(usize),

    #[error("correspondence mismatch: {0}")]
    Correspondence(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("{0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ShapeError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ShapeError::ZeroArea | ShapeError::Degenerate(_) | ShapeError::Singular(_)
        )
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            ShapeError::InvalidMesh(_) => "invalid_mesh",
            ShapeError::ZeroArea => "zero_area",
            ShapeError::IsolatedVertex(_) => "isolated_vertex",
            ShapeError::Correspondence(_) => "correspondence",
            ShapeError::Degenerate(_) => "degenerate",
            ShapeError::Singular(_) => "singular",
            ShapeError::InvalidArgument(_) => "invalid_argument",
            ShapeError::Parse { .. } => "parse",
            ShapeError::Format { .. } => "format",
            ShapeError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ShapeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        ShapeError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
