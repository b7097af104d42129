use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("participation system has numerical rank {rank} < {required}; near-dependent rows: {}", rows.join(", "))]
    RankDeficient {
        rank: usize,
        required: usize,
        rows: Vec<String>,
    },

    #[error("mode {label} has zero predicted loss rate")]
    ZeroLossRate { label: String },

    #[error("total loss is zero")]
    ZeroTotalLoss,

    #[error("non-negative least squares did not converge after {iterations} iterations (residual norm {residual:e})")]
    NnlsNoConvergence { iterations: usize, residual: f64 },

    #[error("{failed} of {total} Monte-Carlo samples failed (first failure: {first})")]
    MonteCarlo {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("mode sets differ between sweep points {first} and {second}")]
    InconsistentModes { first: usize, second: usize },

    #[error("no sign change of sigma/x - 1 in [{lo:e}, {hi:e}]")]
    NoBoundary { lo: f64, hi: f64 },

    #[error("resonance fit failed: {reason}")]
    FitFailure { reason: String },

    #[error("no gap-sensitive mode among the measured modes")]
    NoGapSensitiveMode,

    #[error("measured frequencies lie outside the tabulated range for every gap")]
    GapOutOfRange,
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid { .. }
            | Error::DimensionMismatch { .. }
            | Error::InconsistentModes { .. }
            | Error::ZeroTotalLoss => ErrorKind::Validation,
            _ => ErrorKind::Solver,
        }
    }
}
