use thiserror::Error;

use crate::config::ConfigError;

/// Failure of a command, classified by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or settings (exit code 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or inconsistent input data (exit code 2).
    #[error("{0}")]
    Data(String),
    /// Training divergence or non-finite dynamics (exit code 3).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<nnpkit::Error> for CliError {
    fn from(e: nnpkit::Error) -> Self {
        use nnpkit::Error as E;
        let message = e.to_string();
        match e {
            E::InvalidConfig(_)
            | E::InvalidNeighborSpec(_)
            | E::InvalidPrior(_)
            | E::InvalidGrid(_)
            | E::CutoffTooLarge { .. }
            | E::EmptyPotential
            | E::InfeasibleSplit(_) => CliError::Usage(message),
            E::Diverged { .. } | E::NonFiniteForces(_) => CliError::Numeric(message),
            _ => CliError::Data(message),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("io error on {}: {e}", path.display()))
}
