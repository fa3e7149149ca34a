use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed TOML or an unknown key; the message carries the line.
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{origin}{}: [{section}] {key} {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Invalid {
        origin: String,
        line: Option<usize>,
        section: &'static str,
        key: &'static str,
        message: String,
    },
    #[error("--threads: {0}")]
    Threads(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: skeleton_control::Error,
    },
    #[error("serializing report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Invalid { .. } | CliError::Threads(_) => 2,
            _ => 1,
        }
    }
}

/// Attaches a description of the failing stage to library errors.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for skeleton_control::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Run {
            context: what.into(),
            source,
        })
    }
}
