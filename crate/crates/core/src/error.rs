use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Index labels or dimensions do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// Every singular value fell below the cutoff (zero or near-zero input).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("graph is not planar; obstruction edges: {certificate:?}")]
    NonPlanar { certificate: Vec<(usize, usize)> },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("invalid partitioning: {0}")]
    Partition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("state file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Degenerate(_) | Error::NotPsd(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
