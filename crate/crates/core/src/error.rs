use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An entry of s(x) is too close to zero to scale by 1/s_i.
    #[error("|s_{index}| = {value:.3e} is below the singular-scaling guard {limit:.1e}")]
    SingularScaling {
        index: usize,
        value: f64,
        limit: f64,
    },

    #[error(
        "scaled matrix is rank deficient: sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}"
    )]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("{context} contains a non-finite entry")]
    NonFinite { context: &'static str },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// A finite-difference probe point violated the snapshot preconditions.
    /// Callers must shrink the step instead of silently clamping.
    #[error("finite-difference probe left the domain at coordinate {coordinate}: {source}")]
    DomainCrossing {
        coordinate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Hessian factorization failed and the regularization fallback was exhausted")]
    SingularHessian,

    #[error("step halving cap ({cap}) exhausted at iteration {iteration}")]
    StepTrapped { iteration: usize, cap: u32 },

    #[error("starting point violates snapshot preconditions: {source}")]
    InvalidStart {
        #[source]
        source: Box<Error>,
    },

    #[error("run holds no iterates beyond the starting point")]
    EmptyRun,

    #[error("averaged iterate requires a run produced with the k-schedule step policy")]
    NotScheduleRun,

    #[error("resampling budget ({budget}) exhausted while drawing a full-rank matrix")]
    ResamplingExhausted { budget: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
