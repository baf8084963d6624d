use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode space needs at least one mode")]
    EmptyModeSpace,

    #[error("mode {mode} outside 0..{n_modes}")]
    InvalidMode { mode: usize, n_modes: usize },

    #[error("mode {0} repeated in an ordered subset")]
    RepeatedMode(usize),

    #[error("matrix is not a contraction (operator norm {norm:.3e})")]
    NotAContraction { norm: f64 },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("vacuum not cyclic/separating (smallest singular value {smallest:.3e}, largest {largest:.3e})")]
    NotCyclic { smallest: f64, largest: f64 },

    #[error("operator is outside the small algebra (residual {residual:.3e})")]
    OutsideSmallAlgebra { residual: f64 },

    #[error("paired monomial expansion leaves the product span (residual {residual:.3e}, smallest coefficient {smallest:.3e})")]
    PairedSpanViolation { residual: f64, smallest: f64 },

    #[error("insertion sets have unequal parity")]
    UnequalParity,

    #[error("mode {mode} is not a future mode")]
    NotFutureMode { mode: usize },

    #[error("mode {mode} is not a past mode")]
    NotPastMode { mode: usize },

    #[error("precondition failed: {what} (error {error:.3e})")]
    Precondition { what: &'static str, error: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
