use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical routines in this crate fail for a small set of structural
/// reasons (bad shapes, loss of positive definiteness, data that cannot
/// support the requested statistic); each gets its own variant so callers
/// can match on the cause instead of parsing strings.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid increment file: {0}")]
    IncrementFile(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
