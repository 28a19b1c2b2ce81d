use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("graph is not connected")]
    Disconnected,

    #[error("no connected Erdos-Renyi draw after {attempts} attempts (M={nodes}, p={p})")]
    GenerationExhausted { nodes: usize, p: f64, attempts: usize },

    #[error("could not draw separated arm means after {attempts} attempts")]
    InstanceExhausted { attempts: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{key}: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
