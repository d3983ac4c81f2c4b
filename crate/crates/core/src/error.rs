use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// A record violates the documented file schema or a domain invariant.
    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("unknown node id {0}")]
    UnknownNode(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no origin-destination pair is eligible for sampling")]
    NoEligiblePairs,

    #[error("service target {target} is unattainable even with {fleet} vehicles")]
    UnattainableTarget { target: f64, fleet: usize },
}

impl Error {
    pub(crate) fn schema(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
