use std::fmt;

/// A failure mapped to the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags, malformed or inconsistent input (exit 2).
    Validation(String),
    /// A solver or verification failed on valid input (exit 3).
    Solver(String),
    /// Reading or writing a file failed (exit 4).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<superres::Error> for CliError {
    fn from(e: superres::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Solver(e.to_string())
        }
    }
}
