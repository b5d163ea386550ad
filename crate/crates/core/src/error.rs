use thiserror::Error;

/// Errors surfaced by the inference engine and simulation lab.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data failed a structural or value-level validation check.
    #[error("validation error: {0}")]
    Validation(String),

    /// No finite starting point was found for a sampler chain.
    #[error("sampler initialization failed after {attempts} jittered attempts")]
    SamplerInit { attempts: usize },

    /// Intercept calibration did not reach the requested tolerance.
    #[error("calibration failed for subtrial {subtrial}: worst rate error {worst_err:.4} after {restarts} restarts")]
    Calibration {
        subtrial: usize,
        worst_err: f64,
        restarts: usize,
    },

    /// Too many replicate fits failed during a simulation run.
    #[error("{failed} of {total} replicates failed (limit is 5%)")]
    ReplicateFailures { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
