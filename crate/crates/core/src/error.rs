use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite {what} at x = {x}")]
    NonFiniteModel { what: &'static str, x: f64 },

    #[error("non-finite state in replication {replication} at fine step {step}")]
    NonFiniteState { replication: u64, step: usize },

    #[error("model degeneracy: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("{aborted} of {total} replications aborted (limit 0.1%)")]
    TooManyAborts { aborted: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
