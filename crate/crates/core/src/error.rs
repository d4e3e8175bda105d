use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeomError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "hierarchy needs {required} states (K = {k}, N_max = {n_max}) but the budget is {budget}; \
         estimated propagation memory {memory_bytes} bytes"
    )]
    SizingExceeded {
        required: u128,
        budget: usize,
        k: usize,
        n_max: usize,
        memory_bytes: u128,
    },

    #[error("multi-index {0:?} is outside the index space")]
    OutOfSpace(Vec<u8>),

    #[error("ordinal {ordinal} out of range for an index space of {total} states")]
    OrdinalOutOfRange { ordinal: usize, total: usize },

    #[error("{what}: argument {value} outside [-{limit}, {limit}]")]
    Domain {
        what: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite amplitude after step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("oracle not converged: {0}")]
    NotConverged(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, HeomError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> HeomError {
    HeomError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
