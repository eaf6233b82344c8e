use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NonHermitian { asymmetry: f64 },

    #[error("dimension {dim} exceeds the limit of {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("invalid tensor layout: {0}")]
    InvalidLayout(String),

    #[error("postselection target has zero overlap with the joint state")]
    ZeroOverlap,

    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("postselected state is orthogonal to the initial state (|overlap| = {overlap:e})")]
    OrthogonalPostselection { overlap: f64 },

    #[error("observable has zero variance in the initial state")]
    ZeroVariance,

    #[error("target weak value admits no postselected state")]
    DegenerateTarget,

    #[error("probability {0} is outside the allowed range")]
    ProbabilityOutOfRange(f64),

    #[error("outcome {index} has zero probability but nonzero derivative {derivative:e}")]
    InconsistentDerivative { index: usize, derivative: f64 },

    #[error("invalid outcome distribution: {0}")]
    InvalidDistribution(String),

    #[error("branch basis is not orthonormal (max deviation {deviation:e})")]
    BasisNotOrthonormal { deviation: f64 },

    #[error("POVM is invalid: {0}")]
    BasisNotPovm(String),

    #[error("weak value {re}{im:+}i makes the postselection circuit singular")]
    SingularWeakValue { re: f64, im: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("circuit parse error on line {line}: {message}")]
    CircuitParse { line: usize, message: String },
}
