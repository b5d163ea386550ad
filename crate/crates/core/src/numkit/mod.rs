//! Deterministic numerical kernels: normal and bivariate-normal functions,
//! orthant probabilities, highest-density intervals, prior densities, and
//! reproducible random streams.

mod bvn;
mod densities;
mod hdi;
mod normal;
pub mod rng;

pub use bvn::{
    bvn_upper_orthant, sample_bvn, std_bvn_upper, std_bvn_upper_by_conditional, Correlation2, Cov2,
};
pub use densities::{inv_gamma_log_density, lkj_log_density};
pub use hdi::{equal_tailed, hdi, HdInterval};
pub use normal::{
    log_std_normal_cdf, mills_ratio, std_normal_cdf, std_normal_inv_cdf, std_normal_log_pdf,
    std_normal_pdf, truncated_std_normal_inv_cdf,
};
