use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] rmlr_core::error::Error),

    #[error("usage: {0}")]
    Usage(String),

    #[error("dataset: {0}")]
    Data(String),

    #[error("{0}: {1}")]
    Io(String, String),

    #[error("epoch {epoch}: training diverged: {source}")]
    Divergence { epoch: usize, source: rmlr_core::error::Error },
}

impl BenchError {
    /// Process exit code: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            BenchError::Core(rmlr_core::error::Error::ParameterDomain(_)) => 2,
            _ => 1,
        }
    }
}
