/// CLI failure modes, mapped to exit codes in `main`.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration: exit code 2.
    #[error("{0}")]
    Validation(String),

    /// Numerical abort (collision, CFL violation): exit code 3.
    #[error("{0}")]
    Numerical(String),

    /// Everything else (IO and friends): exit code 1.
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<ks_core::Error> for CliError {
    fn from(e: ks_core::Error) -> Self {
        match e {
            ks_core::Error::Collision { .. } | ks_core::Error::CflViolation { .. } => {
                CliError::Numerical(e.to_string())
            }
            ks_core::Error::InvalidParams(_) => CliError::Validation(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
