//! The four outcome models: joint latent-variable (with and without
//! hierarchical borrowing) and binary logistic (with and without borrowing).

mod density;
mod params;
mod types;

pub use density::{
    abba_log_posterior, bin_log_posterior, gradient, linear_predictors, PosteriorDensity,
    Predictor,
};
pub use params::{logistic, Layout, ParameterVector, Transform};
pub use types::{
    latent_sign_indicators, Dataset, Direction, ModelKind, ModelSpec, PriorConfig, ResponderRule,
    SubjectRecord,
};
