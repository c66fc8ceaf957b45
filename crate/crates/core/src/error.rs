use alloc::string::String;

/// Errors raised anywhere in the modelling pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    /// A single input record could not be accepted. `row` is 1-based and
    /// counts data rows (the header is row 0).
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    Validation(String),

    #[error("index {index} out of range (valid: 0..{limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// The interaction column `t * x_k` is identically zero, so the
    /// g-prior variance of `gamma_k` would be infinite.
    #[error("moderator {0} has an identically-zero interaction column")]
    DegeneratePrior(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("no posterior draws")]
    EmptyDraws,

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unknown method `{name}`; known methods: {roster}")]
    UnknownMethod { name: String, roster: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
