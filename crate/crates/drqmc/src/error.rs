use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument (dimension mismatch, bad flag value, ...).
    #[error("config error: {0}")]
    Config(String),

    /// An instance a routine does not support (e.g. exact star discrepancy for d > 2).
    #[error("unsupported instance: {0}")]
    Unsupported(String),

    /// A non-finite value where one is not allowed.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The sample index space is exhausted.
    #[error("sample index overflow: {0}")]
    IndexOverflow(String),

    /// Training was aborted because the loss or gradient became non-finite.
    /// Carries the diagnostic snapshot of the offending step.
    #[error("training aborted at iteration {iteration}: {quantity} is non-finite (loss={loss}, grad_norm={grad_norm})")]
    TrainingAborted {
        iteration: u64,
        quantity: &'static str,
        loss: f64,
        grad_norm: f64,
    },

    #[error("direction-number table: {0}")]
    Table(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 config, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Unsupported(_) | Error::Table(_) => 1,
            Error::NonFinite(_) | Error::TrainingAborted { .. } | Error::IndexOverflow(_) => 2,
            Error::Io(_) | Error::Serde(_) => 3,
        }
    }
}
