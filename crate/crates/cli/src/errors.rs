//! Error-to-exit-code mapping for the command line.

use std::fmt;

/// Process exit codes: 2 malformed input, 3 validation failure, 4 sampler
/// initialization failure, 5 replicate-failure budget exceeded, 6
/// calibration failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn malformed(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<augbin_core::Error> for CliError {
    fn from(e: augbin_core::Error) -> Self {
        let code = match &e {
            augbin_core::Error::Domain(_) | augbin_core::Error::Validation(_) => 3,
            augbin_core::Error::SamplerInit { .. } => 4,
            augbin_core::Error::ReplicateFailures { .. } => 5,
            augbin_core::Error::Calibration { .. } => 6,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::malformed(format!("io error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::malformed(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
