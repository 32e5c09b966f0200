use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite {what} at gradient step {step}")]
    NonFinite { step: u64, what: &'static str },

    #[error("need {needed} subnetworks but the topology only has {available}")]
    InsufficientSubnetworks { needed: usize, available: usize },

    #[error("subnetwork slot {0} is used twice or is out of range")]
    BadSlot(usize),

    #[error("sample is empty or contains non-finite coordinates")]
    DegenerateSample,

    #[error("trace does not store the iterates")]
    MissingIterates,

    #[error("malformed weight file: {0}")]
    Format(String),

    #[error("run n = {n}, replicate = {replicate} failed: {source}")]
    RunFailed {
        n: usize,
        replicate: usize,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
