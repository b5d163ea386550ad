//! Inference engine and simulation lab for augmented-binary basket trials.
//!
//! The crate models a continuous outcome jointly with a binary failure
//! indicator through a latent-variable probit construction, fits the joint
//! and binary-only variants (each with and without hierarchical borrowing
//! across subtrials) by Hamiltonian Monte Carlo, and evaluates the designs'
//! operating characteristics by simulation.

pub mod error;
pub mod fit;
pub mod models;
pub mod numkit;
pub mod posterior;
pub mod sampler;
pub mod simlab;

pub use error::{Error, Result};
