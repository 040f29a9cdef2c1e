use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("invalid discrete space: {0}")]
    Space(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("singular kernel evaluation at r = 0 ({0})")]
    Singular(&'static str),
    #[error("quadrature did not converge ({context}): best estimate {estimate:e}, error {error:e}")]
    Accuracy {
        context: String,
        estimate: f64,
        error: f64,
    },
    #[error("ill-conditioned first block: condition estimate {0:e}")]
    Conditioning(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("root search failed: {0}")]
    RootSearch(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
