use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("matrix is not square ({rows} x {cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector must have unit norm, got {0}")]
    NotUnit(f64),

    #[error("zero vector")]
    ZeroVector,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("tuned preconditioner is not positive definite")]
    NotPositiveDefinite,

    #[error("dense oracle is limited to n <= {cap}, got n = {n}")]
    OracleTooLarge { n: usize, cap: usize },

    #[error("degenerate eigengap |lambda_2 - lambda| = {gap:e} (beta undefined)")]
    DegenerateGap { gap: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined quantity: {0}")]
    Undefined(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
