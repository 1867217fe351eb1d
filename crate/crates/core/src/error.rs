use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible constraints: {0}")]
    InfeasibleConstraints(String),

    /// A receiver or sample point coincides with an antenna element.
    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    /// The zero-forcing target lies inside the span of the channels to be nulled.
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("instance too large: {count} candidate combinations exceed the limit of {limit}")]
    TooLargeInstance { count: u128, limit: u128 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
