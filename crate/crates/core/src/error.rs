use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched spaces, invalid parameters, malformed inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// Operation not defined for the given task kind (e.g. exact evaluation
    /// on continuous spaces).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violation: {0}")]
    Precondition(String),

    /// Full tabular enumeration refused: the policy count exceeds the cap.
    #[error("enumeration cap exceeded: |A|^|O| = {bound:.3e} > cap {cap:.3e}")]
    EnumerationCap { bound: f64, cap: f64 },

    /// Training failure (NaN gradients, diverging critic, ...).
    #[error("training error: {0}")]
    Training(String),

    /// Success-threshold calibration failed.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// An audit's hypotheses do not hold, so its guarantees do not apply.
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
