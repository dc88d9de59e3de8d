use thiserror::Error;

/// Unified error type for the crate.
///
/// Warnings that do not invalidate a result (boundary MLE estimates, high
/// Pareto k, degenerate importance weights) are reported on the result types
/// themselves, not through this enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trial design: {0}")]
    InvalidDesign(String),

    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("value {value} outside the support of the {family} prior")]
    OutOfSupport { value: f64, family: &'static str },

    #[error("singular expected-information matrix: {0}")]
    SingularInformation(String),

    #[error(
        "exact functional uniform prior needs full curve parameters; use functional_uniform_exact"
    )]
    ExactPriorIsNotScalar,

    #[error("non-finite {0} encountered")]
    NonFinite(&'static str),

    #[error("no finite starting point found after {0} attempts")]
    InitializationFailure(usize),

    #[error("step size adaptation underflowed (epsilon = {0:.3e})")]
    AdaptationFailure(f64),

    #[error("diagnostics need at least 2 chains and 100 draws per chain (got {chains} chains, {draws} draws)")]
    InsufficientDraws { chains: usize, draws: usize },

    #[error("maximum-likelihood fit needs at least 3 distinct dose levels (got {0})")]
    TooFewDoses(usize),

    #[error("model fit failed: {0}")]
    FitFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
