use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or mismatched input data.
    #[error("input error: {0}")]
    Input(String),

    /// A window or stencil would leave the time grid.
    #[error("horizon error: {0}")]
    Horizon(String),

    /// The objective evaluated to -inf (or was undefined) where a finite value is required.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Solver or stencil failure: divergence, singular systems, NaN.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn horizon(msg: impl Into<String>) -> Self {
        Error::Horizon(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Numerical(_) => 3,
            Error::Expr(e) if e.is_evaluation() => 3,
            _ => 2,
        }
    }
}
