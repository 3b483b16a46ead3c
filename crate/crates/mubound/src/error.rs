use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MuError {
    #[error("malformed structure token `{0}` (expected cs:<r>, rs:<r> or cf:<m>)")]
    MalformedToken(String),
    #[error("structure is empty")]
    EmptyStructure,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("eigensolver failed to converge on a {0}x{0} matrix")]
    EigenFailure(usize),
    #[error("target eigenvalue is not simple (gap {gap:.3e} below {threshold:.3e})")]
    NonSimpleTarget { gap: f64, threshold: f64 },
    #[error("left/right eigenvector pair is degenerate (|y*x| = {0:.3e})")]
    DegeneratePair(f64),
    #[error("rank-1 factor sigma underflowed (|sigma| = {0:.3e})")]
    SigmaUnderflow(f64),
    #[error("derivative assumption violated at block {block}: product {value:.3e}")]
    AssumptionViolated { block: usize, value: f64 },
    #[error("matrix has no nonzero eigenvalue")]
    ZeroSpectrum,
    #[error("grid oracle supports at most 2 scalar parameters and no full blocks ({0})")]
    TooManyParameters(String),
    #[error("inner flow failed from every start: {0}")]
    NoProgress(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MuError>;
