use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector has no positive mass to normalize")]
    DegenerateVector,

    #[error("support mismatch: q[{index}] = 0 while p[{index}] > 0")]
    SupportMismatch { index: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("marginals have unequal totals: rows sum to {row_total}, columns to {col_total}")]
    MarginalMismatch { row_total: f64, col_total: f64 },

    #[error("sinkhorn scaling did not converge in {iterations} iterations (final error {final_error:e})")]
    NonConvergence { iterations: usize, final_error: f64 },

    #[error("prior is on the simplex boundary: component {index} is not positive")]
    BoundaryPrior { index: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("at least two hypotheses are required, found {0}")]
    TooFewHypotheses(usize),

    #[error("exact expansion needs {atoms} atoms, above the cap of {cap}")]
    TooManyAtoms { atoms: u128, cap: u128 },

    #[error("numerical underflow: {0}")]
    Underflow(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name, used by the CLI diagnostics and the C ABI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DegenerateVector => "DegenerateVector",
            Error::SupportMismatch { .. } => "SupportMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidProbability(_) => "InvalidProbability",
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::MarginalMismatch { .. } => "MarginalMismatch",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::BoundaryPrior { .. } => "BoundaryPrior",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::TooFewHypotheses(_) => "TooFewHypotheses",
            Error::TooManyAtoms { .. } => "TooManyAtoms",
            Error::Underflow(_) => "Underflow",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, len })
    }
}
