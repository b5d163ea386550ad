//! Rank-normalized split-R̂ and bulk effective sample size.

use serde::{Deserialize, Serialize};

use super::PosteriorDraws;
use crate::numkit::std_normal_inv_cdf;

/// Convergence summary over all coordinates of a posterior sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub split_rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    pub divergences: usize,
    pub max_depth_hits: usize,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.split_rhat.iter().copied().fold(1.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess_bulk.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Split each chain in half, dropping the middle element of odd-length
/// chains.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[n - half..n].to_vec());
    }
    out
}

/// Pooled average ranks with midranks for ties, mapped through the normal
/// quantile function (the rank-normalization of modern R̂/ESS practice).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut indexed: Vec<(f64, usize)> = Vec::with_capacity(total);
    let mut offsets = Vec::with_capacity(chains.len());
    let mut cursor = 0usize;
    for c in chains {
        offsets.push(cursor);
        for &v in c {
            indexed.push((v, cursor));
            cursor += 1;
        }
    }
    indexed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0f64; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && indexed[j + 1].0 == indexed[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for item in &indexed[i..=j] {
            ranks[item.1] = midrank;
        }
        i = j + 1;
    }
    let scale = total as f64 + 0.25;
    let mut out = Vec::with_capacity(chains.len());
    for (ci, c) in chains.iter().enumerate() {
        let start = offsets[ci];
        out.push(
            (0..c.len())
                .map(|i| {
                    let p = (ranks[start + i] - 0.375) / scale;
                    std_normal_inv_cdf(p).expect("rank fraction lies inside (0,1)")
                })
                .collect(),
        );
    }
    out
}

fn chain_mean_var(c: &[f64]) -> (f64, f64) {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Split-R̂ over rank-normalized chains.
///
/// Degenerate inputs are pinned to exactly 1: chains that are bitwise
/// copies of one another carry no between-chain evidence, and a constant
/// pooled sample has nothing to disagree about.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    if chains.is_empty() || chains[0].len() < 4 {
        return f64::NAN;
    }
    if chains.windows(2).all(|w| w[0] == w[1]) && chains.len() > 1 {
        return 1.0;
    }
    let first = chains[0][0];
    if chains.iter().all(|c| c.iter().all(|&v| v == first)) {
        return 1.0;
    }
    let split = split_chains(chains);
    let normalized = rank_normalize(&split);
    rhat_basic(&normalized)
}

fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| chain_mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b_over_n = stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m - 1.0);
    if w <= 0.0 {
        return if b_over_n <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    (var_plus / w).sqrt()
}

/// Bulk effective sample size on rank-normalized split chains, using the
/// combined-chain autocorrelation estimate with Geyer's initial monotone
/// positive sequence.
pub fn bulk_ess(chains: &[Vec<f64>]) -> f64 {
    if chains.is_empty() || chains[0].len() < 4 {
        return f64::NAN;
    }
    let total: usize = chains.iter().map(Vec::len).sum();
    let first = chains[0][0];
    if chains.iter().all(|c| c.iter().all(|&v| v == first)) {
        return total as f64;
    }
    let split = split_chains(chains);
    let normalized = rank_normalize(&split);
    let m = normalized.len() as f64;
    let n = normalized[0].len();
    let nf = n as f64;

    let stats: Vec<(f64, f64)> = normalized.iter().map(|c| chain_mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b_over_n = stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if var_plus <= 0.0 {
        return (m * nf).max(1.0);
    }

    // Per-chain autocovariances at lag t (biased 1/n scaling).
    let acov = |c: &[f64], mean: f64, t: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..(n - t) {
            s += (c[i] - mean) * (c[i + t] - mean);
        }
        s / nf
    };

    let mean_acov_at = |t: usize| -> f64 {
        normalized
            .iter()
            .zip(&stats)
            .map(|(c, (mean, _))| acov(c, *mean, t))
            .sum::<f64>()
            / m
    };

    // rho_t = 1 - (W - mean_acov_t) / var_plus, summed over Geyer pairs.
    let mut rho_sum = 0.0f64;
    let mut prev_pair = f64::INFINITY;
    let mut t = 1usize;
    while t + 1 < n {
        let rho_a = 1.0 - (w - mean_acov_at(t)) / var_plus;
        let rho_b = 1.0 - (w - mean_acov_at(t + 1)) / var_plus;
        let mut pair = rho_a + rho_b;
        if pair < 0.0 {
            break;
        }
        // Enforce monotone non-increasing pair sums.
        pair = pair.min(prev_pair);
        prev_pair = pair;
        rho_sum += pair;
        t += 2;
    }
    let tau = 1.0 + 2.0 * rho_sum;
    ((m * nf) / tau).min(m * nf).max(1.0)
}

/// Diagnostics across every coordinate of a posterior sample.
pub fn diagnostics(draws: &PosteriorDraws) -> Diagnostics {
    let dim = draws.dim();
    let mut split = Vec::with_capacity(dim);
    let mut ess = Vec::with_capacity(dim);
    for d in 0..dim {
        let cols = draws.column(d);
        split.push(split_rhat(&cols));
        ess.push(bulk_ess(&cols));
    }
    Diagnostics {
        names: draws.names.clone(),
        split_rhat: split,
        ess_bulk: ess,
        divergences: draws.divergence_count(),
        max_depth_hits: draws.max_depth_hits(),
    }
}

/// Split-R̂ of an arbitrary scalar series grouped by chain (used for
/// fit-level checks on derived quantities).
pub fn scalar_rhat(chains: &[Vec<f64>]) -> f64 {
    split_rhat(chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normal_chain(seed: u64, mean: f64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn identical_chains_copied_give_exact_one() {
        let c = normal_chain(1, 0.0, 500);
        let rhat = split_rhat(&[c.clone(), c.clone()]);
        assert_eq!(rhat, 1.0);
    }

    #[test]
    fn constant_chains_give_exact_one() {
        let rhat = split_rhat(&[vec![2.5; 100], vec![2.5; 100]]);
        assert_eq!(rhat, 1.0);
        let ess = bulk_ess(&[vec![2.5; 100], vec![2.5; 100]]);
        assert_eq!(ess, 200.0);
    }

    #[test]
    fn separated_chains_flagged() {
        let a = normal_chain(2, 0.0, 500);
        let b = normal_chain(3, 10.0, 500);
        let rhat = split_rhat(&[a, b]);
        assert!(rhat > 1.1, "rhat {rhat}");
    }

    #[test]
    fn well_mixed_chains_near_one() {
        let a = normal_chain(4, 0.0, 2000);
        let b = normal_chain(5, 0.0, 2000);
        let rhat = split_rhat(&[a, b]);
        assert!((rhat - 1.0).abs() < 0.01, "rhat {rhat}");
    }

    #[test]
    fn independent_draws_ess_near_total() {
        let a = normal_chain(6, 0.0, 2000);
        let b = normal_chain(7, 0.0, 2000);
        let ess = bulk_ess(&[a, b]);
        assert!(
            (ess - 4000.0).abs() < 400.0,
            "iid ESS should be within 10% of the total draw count, got {ess}"
        );
    }

    #[test]
    fn autocorrelated_draws_reduce_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut make = |n: usize| {
            let mut x = 0.0f64;
            (0..n)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    x = 0.9 * x + e;
                    x
                })
                .collect::<Vec<f64>>()
        };
        let ess = bulk_ess(&[make(2000), make(2000)]);
        // AR(1) with phi = 0.9 has tau ≈ 19.
        assert!(ess < 1000.0, "ess {ess}");
        assert!(ess > 50.0, "ess {ess}");
    }

    #[test]
    fn ess_capped_at_total_draws() {
        // Strongly antithetic series would push tau below 1.
        let n = 1000;
        let a: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let b: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let ess = bulk_ess(&[a, b]);
        assert!(ess <= 2.0 * n as f64 + 1e-9);
    }

    #[test]
    fn rank_normalization_is_monotone_invariant() {
        let a = normal_chain(10, 0.0, 800);
        let b = normal_chain(11, 0.0, 800);
        let ta: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        let tb: Vec<f64> = b.iter().map(|x| x.exp()).collect();
        let r1 = split_rhat(&[a, b]);
        let r2 = split_rhat(&[ta, tb]);
        assert!((r1 - r2).abs() < 1e-12);
    }
}
