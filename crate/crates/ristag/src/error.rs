use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ristag_core::Error),

    /// A scenario field fails validation.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("empty sample")]
    EmptySample,

    #[error("sample {index} is not a number")]
    NanSample { index: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
