use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, malformed or out of range. `key` is
    /// the dotted path of the offending field, e.g. `failure.p_compute`.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// The data cannot support the requested estimate.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A job was handed an attempt that does not fit its state. Only an
    /// engine bug can produce this.
    #[error("invalid job transition: {0}")]
    Transition(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
