use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: heom_core::Error,
    },

    #[error("compare: {0}")]
    Compare(String),

    #[error("{0}")]
    Usage(String),
}

pub fn field(field: &str, message: impl Into<String>) -> CliError {
    CliError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

/// Attaches a stage name to a core error.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for heom_core::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| CliError::Solver {
            context: what.to_string(),
            source,
        })
    }
}
