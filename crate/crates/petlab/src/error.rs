use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value is not integral: {0}")]
    NonIntegral(String),

    #[error("polynomial is not integer-valued")]
    NotIntegerValued,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate family: polynomials {0} and {1} are essentially equal")]
    DegeneratePair(usize, usize),

    #[error("degenerate family: polynomial {0} is essentially constant")]
    DegenerateConstant(usize),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("step cap {0} exceeded before reaching degree 1")]
    StepCapExceeded(usize),

    #[error("tuple size cap {cap} exceeded: step {step} produced {ell} iterates")]
    SizeCapExceeded { cap: usize, step: usize, ell: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),
}
