use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of a public operation was not met (dimension mismatch,
    /// non-finite input, out-of-range parameter).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Jacobi iteration hit its sweep cap.
    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },

    /// Bad user-supplied configuration: unknown keys, unparsable values, k out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A file that does not decode as the expected format.
    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit code used by the CLI: 1 usage/config, 2 data/contract,
    /// 3 internal convergence failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Contract(_) | Error::Format(_) | Error::Io(_) => 2,
            Error::Convergence { .. } => 3,
        }
    }
}
