use thiserror::Error;

/// Errors produced by the dependency-measure library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("ties present in column {column}; continuous marginals are required (use a jitter tie policy)")]
    TiesPresent { column: usize },

    #[error("materializing {atoms} atoms exceeds the atom budget of {budget}")]
    BudgetExceeded { atoms: u128, budget: u64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("invalid bandwidth {0}: must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("normalizer is not positive ({0:e}); quadrature tolerance too loose")]
    NonPositiveNormalizer(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("operation requires d = 2, got d = {0}")]
    DimNot2(usize),

    #[error("zero variance in column {0}")]
    ZeroVariance(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("series truncation at K = {k} leaves a tail bound of {bound:e} (tolerance {tol:e})")]
    TruncationInsufficient { k: usize, bound: f64, tol: f64 },

    #[error("sampler produced a point outside [0,1]^d: {0}")]
    SamplerRangeViolation(f64),

    #[error("null moment is not positive (mean {mean:e}, variance {variance:e})")]
    NonPositiveMoment { mean: f64, variance: f64 },

    #[error("correlation matrix is not positive semidefinite")]
    NotPsd,

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("{reps} replicates cannot resolve level {level}")]
    InsufficientReplicates { reps: usize, level: f64 },

    #[error("csv row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
