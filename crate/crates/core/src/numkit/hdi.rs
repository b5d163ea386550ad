//! Empirical highest-density intervals.

use crate::error::{Error, Result};

/// Shortest interval containing a given mass of a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HdInterval {
    pub low: f64,
    pub high: f64,
    pub mass: f64,
}

impl HdInterval {
    #[inline]
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Shortest contiguous window covering `ceil(mass·n)` sorted samples.
///
/// Ties break to the leftmost minimal window so results are deterministic.
pub fn hdi(samples: &[f64], mass: f64) -> Result<HdInterval> {
    if samples.is_empty() {
        return Err(Error::Domain("hdi requires a non-empty sample".into()));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::Domain(format!(
            "hdi mass must lie in (0,1), got {mass}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("hdi requires finite samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let m = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = 0usize;
    let mut best_width = f64::INFINITY;
    for i in 0..=(n - m) {
        let width = sorted[i + m - 1] - sorted[i];
        if width < best_width {
            best_width = width;
            best = i;
        }
    }
    Ok(HdInterval {
        low: sorted[best],
        high: sorted[best + m - 1],
        mass,
    })
}

/// Central (equal-tailed) interval over the same empirical convention,
/// provided for sensitivity comparisons against [`hdi`].
pub fn equal_tailed(samples: &[f64], mass: f64) -> Result<HdInterval> {
    if samples.is_empty() {
        return Err(Error::Domain("interval requires a non-empty sample".into()));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::Domain(format!(
            "interval mass must lie in (0,1), got {mass}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("interval requires finite samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let tail = (1.0 - mass) / 2.0;
    let lo_idx = ((tail * n as f64).floor() as usize).min(n - 1);
    let hi_idx = n - 1 - lo_idx;
    Ok(HdInterval {
        low: sorted[lo_idx],
        high: sorted[hi_idx],
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    #[test]
    fn uniform_samples_leftmost_window() {
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let iv = hdi(&samples, 0.5).unwrap();
        // All width-50 windows tie; leftmost wins.
        assert_eq!(iv.low, 1.0);
        assert_eq!(iv.high, 50.0);
        assert_eq!(iv.width(), 49.0);
    }

    #[test]
    fn normal_samples_match_quantile_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let iv = hdi(&samples, 0.95).unwrap();
        assert!((iv.low + 1.96).abs() < 0.05, "low={}", iv.low);
        assert!((iv.high - 1.96).abs() < 0.05, "high={}", iv.high);
    }

    #[test]
    fn skewed_samples_narrower_than_equal_tailed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..50_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal).exp())
            .collect();
        let hd = hdi(&samples, 0.95).unwrap();
        let et = equal_tailed(&samples, 0.95).unwrap();
        assert!(hd.width() < et.width());
    }

    #[test]
    fn hdi_never_wider_than_equal_tailed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.random_range(10..500);
            let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let hd = hdi(&samples, 0.9).unwrap();
            let et = equal_tailed(&samples, 0.9).unwrap();
            assert!(hd.width() <= et.width() + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hdi(&[], 0.5).is_err());
        assert!(hdi(&[1.0, f64::NAN], 0.5).is_err());
        assert!(hdi(&[1.0, f64::INFINITY], 0.5).is_err());
        assert!(hdi(&[1.0, 2.0], 0.0).is_err());
        assert!(hdi(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn single_point_degenerate() {
        let iv = hdi(&[3.5], 0.95).unwrap();
        assert_eq!(iv.low, 3.5);
        assert_eq!(iv.high, 3.5);
        assert!(iv.contains(3.5));
    }
}
