use std::fmt;
use std::process::ExitCode;

use cbf_core::Error;

/// A command failure, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, configuration or rule files. Exit 1.
    Config(String),
    /// Missing, malformed or inconsistent input data. Exit 2.
    Data(String),
    /// The classifier diverged during training. Exit 3.
    Divergence(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Divergence(_) => 3,
        })
    }

    pub fn config(e: impl fmt::Display) -> Self {
        Failure::Config(e.to_string())
    }

    pub fn data(e: impl fmt::Display) -> Self {
        Failure::Data(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Divergence(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } => Failure::Divergence(e.to_string()),
            Error::Config(m) => Failure::Config(m),
            Error::Parameter(_) => Failure::Config(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Rule-file errors are configuration errors, whatever their kind.
pub fn rules_failure(e: Error) -> Failure {
    match e {
        Error::Io { .. }
        | Error::Syntax { .. }
        | Error::UnknownClass { .. }
        | Error::DuplicateRule(_) => Failure::Config(e.to_string()),
        other => other.into(),
    }
}
