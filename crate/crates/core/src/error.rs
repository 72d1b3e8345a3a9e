use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    /// The iterative subproblem solver missed its gap target.
    #[error("subproblem solver did not converge (gap estimate {gap:.3e} after {iterations} iterations)")]
    NonConvergence {
        best: Vec<f64>,
        gap: f64,
        iterations: usize,
    },

    #[error("dynamics model produced a point outside the feasible set")]
    InfeasibleDynamics,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("negative input to accumulator: {0}")]
    NegativeInput(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("offline solver missed its gap target: regret in [{lower}, {upper}]")]
    SolverFailure { lower: f64, upper: f64, gap: f64 },

    #[error("unknown theorem id: {0}")]
    UnknownTheorem(String),

    #[error("unknown model: {0}")]
    UnknownModel(String),

    #[error("degenerate inner product <r, y> = {0:e}")]
    DegenerateInnerProduct(f64),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
