//! Command failures split by exit code: usage problems exit 1, bad or
//! missing data exits 2.

use std::fmt;
use std::io;

use idiorec_core::{AisError, ConfigError, OntologyError};
use idiorec_core::profile::ProfileError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    /// Output pipe closed by the reader; not a failure.
    Pipe,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Pipe => 0,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) => f.write_str(msg),
            CliError::Pipe => f.write_str("broken pipe"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<OntologyError> for CliError {
    fn from(e: OntologyError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AisError> for CliError {
    fn from(e: AisError) -> Self {
        match e {
            AisError::Config(c) => CliError::Usage(c.to_string()),
            AisError::InvalidTopN => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::Pipe
        } else {
            CliError::Data(e.to_string())
        }
    }
}
