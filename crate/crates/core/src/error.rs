use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    NotAProbability { name: &'static str, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid block design: {0}")]
    Design(String),

    #[error("block does not match design: expected {expected_a}+{expected_b} outcomes, got {got_a}+{got_b}")]
    BlockShape {
        expected_a: usize,
        expected_b: usize,
        got_a: usize,
        got_b: usize,
    },

    #[error("invalid null hypothesis: {0}")]
    InvalidNull(String),

    #[error("projection failed: {0}")]
    Projection(String),

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("{message} at line {line}")]
    Input { line: u64, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
