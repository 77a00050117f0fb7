use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parity violation: N + rho + s = {0} must be even")]
    Parity(usize),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singular normalization: {0}")]
    SingularNormalization(String),

    #[error("classification failure: {0}")]
    Classification(String),

    #[error("ambiguous classification: {0}")]
    Ambiguous(String),

    #[error("inexact polynomial division: {0}")]
    InexactDivision(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("unknown {kind} strategy `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
