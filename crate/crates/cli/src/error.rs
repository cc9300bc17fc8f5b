use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("aborted: {0}")]
    Abort(gaussify::Error),

    #[error("predicted limit is unphysical: {0}")]
    Unphysical(String),

    #[error(transparent)]
    Core(gaussify::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<gaussify::Error> for CliError {
    fn from(e: gaussify::Error) -> Self {
        use gaussify::Error as E;
        match e {
            E::VanishingProbability { .. } => CliError::Abort(e),
            E::OutOfRange { .. } | E::InvalidGrid(_) | E::ResourceGuard { .. } | E::NotNormalized { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    /// 0 success, 1 other failure, 2 configuration, 3 probability floor,
    /// 4 unphysical limit.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Abort(_) => 3,
            CliError::Unphysical(_) => 4,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
