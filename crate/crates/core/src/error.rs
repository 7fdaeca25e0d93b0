use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two fields or operators disagree on their grids.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Invalid user-facing configuration. The message names the offending field.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Time stepping or an iteration produced non-finite values.
    #[error("divergence: {0}")]
    Divergence(String),

    /// The lower-level residual refused to decrease after every allowed step halving.
    #[error(
        "lower-level stagnation at iteration {iteration}: residual {residual:e}, step {step:e}"
    )]
    Stagnation {
        iteration: usize,
        residual: f64,
        step: f64,
    },

    #[error("upper iteration {j}: {source}")]
    Upper {
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Upper { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
