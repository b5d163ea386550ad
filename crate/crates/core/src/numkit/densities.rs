//! Unnormalized log densities shared by the model priors.

use crate::error::{Error, Result};
use crate::numkit::bvn::Correlation2;

/// LKJ correlation log density for the 2×2 case, up to an additive
/// constant: `(η − 1)·log(1 − ρ²)`.
pub fn lkj_log_density(rho: Correlation2, eta: f64) -> f64 {
    debug_assert!(eta > 0.0);
    let r = rho.value();
    (eta - 1.0) * (1.0 - r * r).ln()
}

/// Inverse gamma log density up to an additive constant:
/// `-(shape + 1)·log x - scale/x`.
pub fn inv_gamma_log_density(x: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "inverse gamma density requires x > 0, got {x}"
        )));
    }
    debug_assert!(shape > 0.0 && scale > 0.0);
    Ok(-(shape + 1.0) * x.ln() - scale / x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rho(r: f64) -> Correlation2 {
        Correlation2::new(r).unwrap()
    }

    #[test]
    fn lkj_zero_correlation_is_zero() {
        for eta in [0.5, 1.0, 2.0, 5.0] {
            assert_eq!(lkj_log_density(rho(0.0), eta), 0.0);
        }
    }

    #[test]
    fn lkj_eta_one_is_uniform() {
        for r in [-0.9, -0.3, 0.0, 0.5, 0.99] {
            assert_eq!(lkj_log_density(rho(r), 1.0), 0.0);
        }
    }

    #[test]
    fn lkj_direct_substitution() {
        assert_abs_diff_eq!(
            lkj_log_density(rho(0.5), 5.0),
            4.0 * 0.75f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn inv_gamma_mode_at_scale_over_shape_plus_one() {
        let (shape, scale) = (0.5, 0.005);
        let mode = scale / (shape + 1.0);
        assert_abs_diff_eq!(mode, 0.005 / 1.5, epsilon = 1e-15);
        let at_mode = inv_gamma_log_density(mode, shape, scale).unwrap();
        for x in [mode * 0.5, mode * 0.9, mode * 1.1, mode * 2.0] {
            assert!(inv_gamma_log_density(x, shape, scale).unwrap() < at_mode);
        }
    }

    #[test]
    fn inv_gamma_monotone_decreasing_past_mode() {
        let (shape, scale) = (0.5, 0.005);
        let mode = scale / (shape + 1.0);
        let mut prev = inv_gamma_log_density(mode, shape, scale).unwrap();
        let mut x = mode;
        for _ in 0..30 {
            x *= 1.5;
            let cur = inv_gamma_log_density(x, shape, scale).unwrap();
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn inv_gamma_rejects_nonpositive() {
        assert!(inv_gamma_log_density(0.0, 0.5, 0.005).is_err());
        assert!(inv_gamma_log_density(-1.0, 0.5, 0.005).is_err());
    }
}
