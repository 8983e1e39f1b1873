use std::path::Path;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A check ran and did not pass.
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    BadInput(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::BadInput(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }
}

impl From<imgidx_core::Error> for CliError {
    fn from(e: imgidx_core::Error) -> Self {
        match e {
            imgidx_core::Error::Training(_) => CliError::Failed(e.to_string()),
            _ => CliError::BadInput(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
