use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model, scenario or event description failed validation. `field` is a
    /// dotted path into the offending document.
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation diverged at step {step} (t = {t:.6} s): non-finite state")]
    Diverged { step: usize, t: f64 },

    #[error("block `{0}` has no governor")]
    NoGovernor(String),

    #[error("event carries no information about the parameters: {0}")]
    Unidentifiable(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("window of {window:.6} s does not fit in a trace of {span:.6} s")]
    WindowTooLong { window: f64, span: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (divergence) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Diverged { .. })
    }
}
