use ionphoton::cavity::CavityError;
use ionphoton::jones::JonesError;
use ionphoton::sim::SimError;
use ionphoton::tomography::TomoError;

/// Failure of a command, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Prefixes the message with where it came from, keeping the class.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::NonConvergence(m) => CliError::NonConvergence(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<TomoError> for CliError {
    fn from(e: TomoError) -> Self {
        match e {
            TomoError::NotConverged(_) => CliError::NonConvergence(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(io) => CliError::Io(io.to_string()),
            SimError::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => CliError::Io(e.to_string()),
            SimError::Fit(t) => t.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<JonesError> for CliError {
    fn from(e: JonesError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CavityError> for CliError {
    fn from(e: CavityError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
