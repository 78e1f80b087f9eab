use thiserror::Error;

/// Errors produced while building, solving, generating or reading instances.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A closed form was evaluated outside the region where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input")]
    EmptyInput,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported file header `{0}`")]
    Version(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
