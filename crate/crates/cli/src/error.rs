use std::fmt;

/// CLI failure, split by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or parameters (exit 1).
    Config(String),
    /// Numeric breakdown during a run (exit 2).
    Numeric(String),
    /// Filesystem failure reading config or writing outputs (exit 1).
    Io(String, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            CliError::Config(_) | CliError::Io(..) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(path, e) => write!(f, "{path}: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ffst::Error> for CliError {
    fn from(e: ffst::Error) -> Self {
        match e {
            ffst::Error::NumericFailure(m) => CliError::Numeric(m),
            // line 0: JSON config or --set, which have no line numbers
            ffst::Error::Parse { line: 0, message } => CliError::Config(message),
            other => CliError::Config(other.to_string()),
        }
    }
}
