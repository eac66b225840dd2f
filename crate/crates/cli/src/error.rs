use std::fmt;

use koopman_pssd::Error;
use serde::Serialize;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NO_TERMINATION: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
    Io(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn root(e: &Error) -> &Error {
    match e {
        Error::AbortRound { source, .. } => root(source),
        other => other,
    }
}

/// Machine-readable failure, printed to stderr as one JSON object.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds_executed: Option<usize>,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match root(e) {
                Error::InvalidInput(_) | Error::SignatureRankError { .. } => EXIT_CONFIG,
                Error::NoTermination(_) => EXIT_NO_TERMINATION,
                _ => EXIT_NUMERICAL,
            },
            CliError::Io(_) | CliError::Internal(_) => EXIT_NUMERICAL,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Internal(_) => "internal",
            CliError::Core(e) => match root(e) {
                Error::NoTermination(_) => "no_termination",
                Error::InvalidInput(_) | Error::SignatureRankError { .. } => "config",
                _ => "numerical",
            },
        };
        let rounds_executed = match self {
            CliError::Core(e) => match root(e) {
                Error::NoTermination(rep) => Some(rep.rounds_executed),
                _ => None,
            },
            _ => None,
        };
        ErrorReport {
            kind,
            message: self.to_string(),
            exit_code: self.exit_code(),
            rounds_executed,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
