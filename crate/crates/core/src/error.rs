//! Crate-wide error type.

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A moment triple does not induce a valid joint distribution.
    #[error("invalid moments (m1={m1}, m2={m2}, m12={m12}): {reason}")]
    InvalidMoments {
        m1: f64,
        m2: f64,
        m12: f64,
        reason: String,
    },

    /// Probabilities are negative or fail to normalize.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// Conditioning on an event of (numerically) zero probability.
    #[error("conditioning event has probability {prob:e}, at or below {tol:e}")]
    ZeroProbabilityCondition { prob: f64, tol: f64 },

    /// The exchangeability condition cannot be evaluated because a
    /// conditioning event is (numerically) impossible.
    #[error("exchangeability undefined: conditioning event has probability {prob:e}")]
    UndefinedConditional { prob: f64 },

    /// A conditional form valid only under exchangeability was requested
    /// for non-exchangeable moments.
    #[error("moments are not exchangeable within tolerance {tol:e}")]
    NotExchangeable { tol: f64 },

    /// A correlation outside [-1, 1] was fed to a combination that
    /// requires bounded correlations.
    #[error("correlation value {0} lies outside [-1, 1]")]
    OutOfRangeCorrelation(f64),

    /// Operation applied to a model of the wrong kind.
    #[error("operation requires a {expected} model, got {actual}")]
    WrongKind {
        expected: &'static str,
        actual: &'static str,
    },

    /// A (λ, setting) lookup outside the model's declared tables.
    #[error("missing entry: {0}")]
    MissingEntry(String),

    /// Model construction violated an invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A model or table file violated its schema.
    #[error("file format: {0}")]
    FileFormat(String),

    /// Strategy enumeration was asked for more settings than the bound.
    #[error("{total} settings exceed the enumeration bound of {bound}")]
    TooManySettings { total: usize, bound: usize },

    /// A simulation configuration violated an invariant.
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    /// An empirical table with no recorded trials was compared.
    #[error("empirical table holds no trials")]
    NoData,

    /// Worker-pool construction failed.
    #[error("parallelism: {0}")]
    Parallelism(String),

    /// Filesystem failure while loading or saving.
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
