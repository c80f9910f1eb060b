use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("svd did not converge after {sweeps} sweeps (worst relative off-diagonal {residual:.3e})")]
    SvdNoConvergence { sweeps: usize, residual: f64 },

    #[error("unsupported norm for this operation: {0}")]
    UnsupportedNorm(String),

    #[error("oracle undefined for this input: {0}")]
    UndefinedOracle(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("unknown client id {0}")]
    UnknownClient(usize),

    #[error("non-finite loss at round {round}, local step {step}")]
    NonFiniteLoss { round: usize, step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("trace parse error: {0}")]
    TraceParse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
