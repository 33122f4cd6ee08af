use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("argument outside support: {0}")]
    Support(String),

    #[error("invalid argument: {0}")]
    Arg(String),

    #[error("sampler initialization failed: {0}")]
    Init(String),

    #[error("sampler diverged: {0}")]
    Divergence(String),

    #[error("truncated sampling infeasible: {0}")]
    Feasibility(String),

    /// Optimizer did not converge. Carries the objective values of the iterates.
    #[error("optimizer did not converge: {message}")]
    Optim { message: String, trace: Vec<f64> },

    #[error("corrupt or truncated file at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn support(msg: impl Into<String>) -> Self {
        Error::Support(msg.into())
    }

    pub fn arg(msg: impl Into<String>) -> Self {
        Error::Arg(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
