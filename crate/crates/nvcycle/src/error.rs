use std::process::ExitCode;

use thiserror::Error;

/// Failures of a command, each with a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed configuration or input files.
    #[error("{0}")]
    Usage(String),
    /// The model or engine rejected the configuration.
    #[error("invalid configuration: {0}")]
    Model(#[from] nvcycle_core::Error),
    /// A fit ran but did not converge; its result was still written.
    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    /// No physical parameter set reproduces the observables.
    #[error("extraction infeasible: {0}")]
    Infeasible(nvcycle_core::Error),
    /// Writing outputs failed.
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
            CliError::Io { .. } => 1,
            CliError::Usage(_) | CliError::Model(_) => 2,
            CliError::NonConvergence { .. } => 3,
            CliError::Infeasible(_) => 4,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}
