use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io { .. } => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Numeric(_) => "numeric",
            Self::Io { .. } => "io",
        }
    }

    /// The single-line form printed on failure, e.g.
    /// `error[config]: unknown key ...`.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.category())
    }
}

impl From<clickdyn::Error> for CliError {
    fn from(e: clickdyn::Error) -> Self {
        match e {
            clickdyn::Error::Domain { .. } | clickdyn::Error::IncompatibleRegion(_) => Self::Config(e.to_string()),
            other => Self::Numeric(other.to_string()),
        }
    }
}
