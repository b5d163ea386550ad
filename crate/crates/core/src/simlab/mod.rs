//! Simulation lab: scenario definitions, intercept calibration, data
//! generation, replicate execution, and operating-characteristic metrics.

mod calibrate;
mod generate;
mod metrics;
mod nelder_mead;
mod replicates;
mod scenarios;

pub use calibrate::{
    achieved_rates, calibrate_intercepts, calibrate_with_rates, with_calibrated_beta,
    AchievedRates,
};
pub use generate::{generate_dataset, generating_summary, GeneratingSummary};
pub use metrics::{compute_metrics, MetricsReport, MetricsRow, ReplicateCell};
pub use nelder_mead::{minimize, NmOptions};
pub use replicates::{run_replicates, ReplicateRow, RunConfig, RunOutput};
pub use scenarios::{scenario_library, BaselineModel, ScenarioSpec, SubtrialScenario};
