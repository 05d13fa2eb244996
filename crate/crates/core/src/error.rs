use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("element is not self-adjoint (||a - a*|| = {residual:.3e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("element is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("not a unital *-subalgebra: {0}")]
    NotSubalgebra(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid flag: {0}")]
    InvalidFlag(String),

    #[error("element is singular (smallest singular value {smallest:.3e}, norm {norm:.3e})")]
    Singular { smallest: f64, norm: f64 },

    #[error("rank mismatch at flag step {step}: rank of e_j is {expected}, rank of the support difference is {found}")]
    RankMismatch { step: usize, expected: usize, found: usize },

    #[error("element is not block-upper-triangular for the flag (residual {residual:.3e})")]
    NotInParabolic { residual: f64 },

    #[error("element does not lie in the subalgebra (distance {distance:.3e})")]
    OutsideSubalgebra { distance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
