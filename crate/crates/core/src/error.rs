use thiserror::Error;

pub type Result<T> = std::result::Result<T, QpirError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpirError {
    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("register `{0}` declared twice")]
    DuplicateRegister(String),

    #[error("register `{0}` must have width >= 1")]
    ZeroWidth(String),

    #[error("{what} needs {requested} qubits, cap is {cap}")]
    CapExceeded {
        what: String,
        requested: usize,
        cap: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("width mismatch: {0}")]
    WidthMismatch(String),

    #[error("state not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("projection onto the target state has zero probability")]
    ZeroProjection,

    #[error("measurement outcome has zero probability")]
    ZeroProbability,

    #[error("protocol step {step}: {reason}")]
    Protocol { step: usize, reason: String },

    #[error("adversary supplies no recovery operators: {0}")]
    MissingRecovery(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl QpirError {
    pub(crate) fn step(step: usize, reason: impl Into<String>) -> Self {
        QpirError::Protocol {
            step,
            reason: reason.into(),
        }
    }
}
