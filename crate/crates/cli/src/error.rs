use std::fmt;

use xsrl::alignment::AlignmentError;
use xsrl::corpus::CorpusError;
use xsrl::eval::EvalError;
use xsrl::model::ModelError;
use xsrl::postag::PosError;
use xsrl::projection::ProjectionError;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input files.
    Input(String),
    /// A broken invariant inside the pipeline.
    Internal(String),
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError::Internal(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    /// Prefixes the message with context such as a file name.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! input_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        })*
    };
}

input_errors!(std::io::Error, AlignmentError, CorpusError, EvalError, PosError, ProjectionError);

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Dimension(_) => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}
