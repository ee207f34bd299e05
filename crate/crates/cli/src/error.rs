use std::fmt;
use std::process::ExitCode;

use proxpol::Error as CoreError;
use proxpol_ps::PsError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Divergence(String),
    Transport(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Other(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Transport(_) => 4,
        })
    }

    /// Prefixes the message with the role that produced it.
    pub fn context(self, who: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{who}: {m}")),
            CliError::Divergence(m) => CliError::Divergence(format!("{who}: {m}")),
            CliError::Transport(m) => CliError::Transport(format!("{who}: {m}")),
            CliError::Other(m) => CliError::Other(format!("{who}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Divergence(m) => write!(f, "{m}"),
            CliError::Transport(m) => write!(f, "transport error: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::DivergenceDetected { .. } => CliError::Divergence(e.to_string()),
            CoreError::IncompatiblePolicies(_) | CoreError::Config(_) | CoreError::InvalidSpectrum { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<PsError> for CliError {
    fn from(e: PsError) -> Self {
        match e {
            PsError::Solver(inner) => inner.into(),
            other => CliError::Transport(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
