use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Penalty or solver parameters violate their invariants.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An input breaks an operation's precondition (shape, ordering, length).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The fixed-lambda sufficient-decrease inequality failed. Indicates a bug
    /// or a penalty that is not concave and nondecreasing.
    #[error(
        "descent violated at iteration {iteration}: decrease {decrease:.3e} < bound {bound:.3e}"
    )]
    DescentViolation {
        iteration: usize,
        decrease: f64,
        bound: f64,
    },

    #[error("channel {channel}: {source}")]
    Channel {
        channel: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
