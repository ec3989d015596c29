use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("axes misaligned: angle {angle:.4} rad exceeds tolerance {tol:.4} rad")]
    MisalignedAxes { angle: f64, tol: f64 },

    #[error("tile count {count} exceeds cap {cap}")]
    TooManyTiles { count: u64, cap: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coverage failure: lattice point {index} of the neighborhood has no cap bump")]
    CoverageFailure { index: usize },

    #[error("frequency support leaves the partition: outside mass fraction {fraction:.3e}")]
    SupportViolation { fraction: f64 },

    #[error("grid too large: {points} points exceeds limit {limit}; largest feasible R is {suggested_r}")]
    GridOverflow {
        points: u64,
        limit: u64,
        suggested_r: u64,
    },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
