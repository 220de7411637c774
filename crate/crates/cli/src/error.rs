use std::fmt;

/// Failure with a stable process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or an invalid generator spec.
    Usage(String),
    /// Policy, instance and artifacts that cannot be combined.
    Incompatible(String),
    /// Nothing to aggregate.
    Empty(String),
    /// At least one selected audit or trace check failed.
    AuditFailed(String),
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Incompatible(_) => 3,
            CliError::Empty(_) => 4,
            CliError::AuditFailed(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Incompatible(m) => write!(f, "incompatible input: {m}"),
            CliError::Empty(m) => write!(f, "empty input: {m}"),
            CliError::AuditFailed(m) => write!(f, "audit failed: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
