//! Unified error type; variants map onto the CLI exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("right-hand side has non-zero average {avg:.3e} (tolerance {tol:.3e})")]
    NonZeroAverage { avg: f64, tol: f64 },

    #[error("exact resonance: multiplier vanishes at mode {mode:?}")]
    ExactResonance { mode: Vec<i64> },

    #[error("nondegeneracy failure: {0}")]
    NondegeneracyFailure(String),

    #[error("degenerate average: {0}")]
    DegenerateAverage(String),

    #[error("series too short: order {0} not supplied")]
    MissingOrder(usize),

    #[error("norm overflow: {0}")]
    NormOverflow(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("zero norm: {0}")]
    ZeroNorm(String),

    #[error("fit underdetermined: {0}")]
    FitUnderdetermined(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("configuration error:\n{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI. 0 is success; 1 is reserved for
    /// uncategorized failures (I/O and internal errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::DimensionMismatch(_) => 2,
            Error::ExactResonance { .. } | Error::NonZeroAverage { .. } => 3,
            Error::NondegeneracyFailure(_) | Error::DegenerateAverage(_) => 4,
            Error::NormOverflow(_) => 5,
            _ => 1,
        }
    }
}
