//! Hamiltonian Monte Carlo with dynamic (no-U-turn) trajectories,
//! multi-chain orchestration, and convergence diagnostics.

mod diagnostics;
mod nuts;

pub use diagnostics::{bulk_ess, diagnostics, scalar_rhat, split_rhat, Diagnostics};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Layout, ParameterVector, PosteriorDensity, Transform};
use crate::numkit::rng::{stream, StreamPurpose};
use nuts::{Chain, DualAverage, RunningVariance, WarmupSchedule};

/// A differentiable unnormalized log density.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density. A
    /// non-finite return marks the point as outside the supported region.
    fn logp_and_grad(&self, pos: &[f64], grad: &mut [f64]) -> f64;

    /// Coordinate names for reporting.
    fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x.{}", i + 1)).collect()
    }

    /// Coordinates that hold logit-scale latent components, if any; these
    /// are initialized from Uniform(0.05, 0.95) on the constrained scale.
    fn latent_range(&self) -> Option<std::ops::Range<usize>> {
        None
    }
}

impl LogDensity for PosteriorDensity {
    fn dim(&self) -> usize {
        self.layout().dim
    }

    fn logp_and_grad(&self, pos: &[f64], grad: &mut [f64]) -> f64 {
        self.logp_grad(pos, Some(grad))
    }

    fn names(&self) -> Vec<String> {
        self.layout().names()
    }

    fn latent_range(&self) -> Option<std::ops::Range<usize>> {
        self.layout()
            .latent
            .map(|o| o..o + self.layout().n_latent)
    }
}

/// Chain schedule and adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    /// Stream coordinates so concurrent fits never share random numbers.
    pub stream_replicate: u64,
    pub stream_lane: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::paper(0)
    }
}

impl SamplerConfig {
    /// The full schedule: 2 chains, 10,000 draws after 5,000 warm-up.
    pub fn paper(seed: u64) -> Self {
        Self {
            chains: 2,
            warmup_iters: 5_000,
            sampling_iters: 10_000,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed,
            stream_replicate: 0,
            stream_lane: 0,
        }
    }

    /// Desk-scale profile for development and simulation studies.
    pub fn desk(seed: u64) -> Self {
        Self {
            warmup_iters: 500,
            sampling_iters: 1_000,
            ..Self::paper(seed)
        }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk(seed)),
            "paper" => Ok(Self::paper(seed)),
            other => Err(Error::Validation(format!(
                "unknown sampler preset '{other}' (expected desk or paper)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.sampling_iters == 0 {
            return Err(Error::Validation(
                "sampler needs at least one chain and one sampling iteration".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Validation(format!(
                "target_accept must lie in (0,1), got {}",
                self.target_accept
            )));
        }
        if self.max_tree_depth == 0 || self.max_tree_depth > 16 {
            return Err(Error::Validation(
                "max_tree_depth must lie in 1..=16".into(),
            ));
        }
        Ok(())
    }
}

/// How chains pick their starting points.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Unconstrained coordinates from Uniform(-2, 2), jittered per chain;
    /// latent coordinates from Uniform(0.05, 0.95) on the (0,1) scale.
    Jittered,
    /// Start every chain from the given unconstrained point.
    Fixed(Vec<f64>),
}

/// Retained draws and adaptation state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Row-major (iteration × dimension) unconstrained draws.
    pub draws: Vec<f64>,
    pub divergent: Vec<bool>,
    pub step_size: f64,
    pub inv_mass_diag: Vec<f64>,
    pub max_depth_hits: usize,
}

/// Multi-chain posterior sample with its coordinate index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub transforms: Vec<Transform>,
    pub n_draws: usize,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    #[inline]
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    #[inline]
    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        let d = self.dim();
        &self.chains[chain].draws[iter * d..(iter + 1) * d]
    }

    /// All chains' values of one coordinate, chain-major.
    pub fn column(&self, coord: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.chains
            .iter()
            .map(|c| (0..self.n_draws).map(|i| c.draws[i * d + coord]).collect())
            .collect()
    }

    pub fn divergence_count(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.divergent.iter().filter(|d| **d).count())
            .sum()
    }

    pub fn max_depth_hits(&self) -> usize {
        self.chains.iter().map(|c| c.max_depth_hits).sum()
    }

    pub fn total_draws(&self) -> usize {
        self.n_draws * self.chains.len()
    }
}

/// Draw a starting point for one chain.
pub fn initialize<T: LogDensity + ?Sized>(
    target: &T,
    strategy: &InitStrategy,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    match strategy {
        InitStrategy::Fixed(point) => point.clone(),
        InitStrategy::Jittered => {
            let latent = target.latent_range();
            (0..target.dim())
                .map(|i| {
                    if latent.as_ref().is_some_and(|r| r.contains(&i)) {
                        let u: f64 = rng.random_range(0.05..0.95);
                        (u / (1.0 - u)).ln()
                    } else {
                        rng.random_range(-2.0..2.0)
                    }
                })
                .collect()
        }
    }
}

/// Initialize a parameter vector for a model layout (domain-facing variant
/// of [`initialize`]).
pub fn initialize_params(
    layout: &Layout,
    strategy: &InitStrategy,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<ParameterVector> {
    struct Probe<'a>(&'a Layout);
    impl LogDensity for Probe<'_> {
        fn dim(&self) -> usize {
            self.0.dim
        }
        fn logp_and_grad(&self, _: &[f64], _: &mut [f64]) -> f64 {
            0.0
        }
        fn latent_range(&self) -> Option<std::ops::Range<usize>> {
            self.0.latent.map(|o| o..o + self.0.n_latent)
        }
    }
    ParameterVector::new(layout.clone(), initialize(&Probe(layout), strategy, rng))
}

/// Run the full multi-chain schedule against a target density.
///
/// Chains execute concurrently; each derives its own random stream from
/// `(seed, stream_replicate, stream_lane + chain)`, so results are
/// bit-identical for a fixed configuration regardless of scheduling.
pub fn run<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    strategy: &InitStrategy,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let chain_results: Vec<Result<ChainDraws>> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, strategy, c))
        .collect();
    let mut chains = Vec::with_capacity(config.chains);
    for r in chain_results {
        chains.push(r?);
    }
    Ok(PosteriorDraws {
        names: target.names(),
        transforms: transforms_for(target),
        n_draws: config.sampling_iters,
        chains,
    })
}

fn transforms_for<T: LogDensity + ?Sized>(target: &T) -> Vec<Transform> {
    let mut ts = vec![Transform::Identity; target.dim()];
    if let Some(r) = target.latent_range() {
        for t in &mut ts[r] {
            *t = Transform::Logit;
        }
    }
    ts
}

fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    strategy: &InitStrategy,
    chain_idx: usize,
) -> Result<ChainDraws> {
    let mut rng = stream(
        config.seed,
        StreamPurpose::Chain,
        config.stream_replicate,
        config.stream_lane + chain_idx as u64,
    );

    // Jittered initialization: retry until the density and gradient are
    // finite at the starting point.
    let mut chain = None;
    let attempts = if matches!(strategy, InitStrategy::Fixed(_)) { 1 } else { 100 };
    for _ in 0..attempts {
        let point = initialize(target, strategy, &mut rng);
        if let Some(c) = Chain::new(target, point, rng.clone(), config.max_tree_depth) {
            chain = Some(c);
            break;
        }
    }
    let mut chain = chain.ok_or(Error::SamplerInit { attempts })?;

    let dim = target.dim();
    let schedule = WarmupSchedule::plan(config.warmup_iters);
    chain.find_reasonable_step_size();
    let mut da = DualAverage::new(chain.step_size, config.target_accept);
    let mut window = RunningVariance::new(dim);
    let mut window_cursor = 0usize;

    for m in 0..config.warmup_iters {
        let info = chain.step();
        chain.step_size = da.update(info.accept_stat);
        let in_slow = m >= schedule.init_end && m < schedule.term_start;
        if in_slow {
            window.push(&chain.pos);
        }
        if window_cursor < schedule.window_ends.len() && m + 1 == schedule.window_ends[window_cursor]
        {
            if window.count() >= 10.0 {
                chain.set_inv_mass(window.regularized());
                chain.find_reasonable_step_size();
                da = DualAverage::new(chain.step_size, config.target_accept);
            }
            window.reset();
            window_cursor += 1;
        }
    }
    if config.warmup_iters > 0 {
        chain.step_size = da.adapted();
    }

    let mut draws = Vec::with_capacity(config.sampling_iters * dim);
    let mut divergent = Vec::with_capacity(config.sampling_iters);
    let mut max_depth_hits = 0usize;
    for _ in 0..config.sampling_iters {
        let info = chain.step();
        draws.extend_from_slice(&chain.pos);
        divergent.push(info.divergent);
        if info.hit_max_depth {
            max_depth_hits += 1;
        }
    }
    Ok(ChainDraws {
        draws,
        divergent,
        step_size: chain.step_size,
        inv_mass_diag: chain.inv_mass.clone(),
        max_depth_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gaussian {
        dim: usize,
        rho: f64,
    }

    impl LogDensity for Gaussian {
        fn dim(&self) -> usize {
            self.dim
        }
        fn logp_and_grad(&self, pos: &[f64], grad: &mut [f64]) -> f64 {
            if self.dim == 2 && self.rho != 0.0 {
                let det = 1.0 - self.rho * self.rho;
                let (x, y) = (pos[0], pos[1]);
                grad[0] = -(x - self.rho * y) / det;
                grad[1] = -(y - self.rho * x) / det;
                -0.5 * (x * x - 2.0 * self.rho * x * y + y * y) / det
            } else {
                let mut lp = 0.0;
                for i in 0..self.dim {
                    lp -= 0.5 * pos[i] * pos[i];
                    grad[i] = -pos[i];
                }
                lp
            }
        }
    }

    fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn recovers_standard_normal_moments() {
        let target = Gaussian { dim: 10, rho: 0.0 };
        let config = SamplerConfig {
            chains: 2,
            warmup_iters: 500,
            sampling_iters: 2000,
            ..SamplerConfig::desk(42)
        };
        let draws = run(&target, &config, &InitStrategy::Jittered).unwrap();
        for d in 0..10 {
            let flat: Vec<f64> = draws.column(d).into_iter().flatten().collect();
            let (mean, sd) = mean_and_sd(&flat);
            assert!(mean.abs() < 0.03, "dim {d} mean {mean}");
            assert!((sd - 1.0).abs() < 0.05, "dim {d} sd {sd}");
        }
        assert_eq!(draws.divergence_count(), 0);
    }

    #[test]
    fn recovers_correlated_gaussian() {
        let target = Gaussian { dim: 2, rho: 0.9 };
        let config = SamplerConfig {
            sampling_iters: 2000,
            ..SamplerConfig::desk(7)
        };
        let draws = run(&target, &config, &InitStrategy::Jittered).unwrap();
        let xs: Vec<f64> = draws.column(0).into_iter().flatten().collect();
        let ys: Vec<f64> = draws.column(1).into_iter().flatten().collect();
        let (mx, sx) = mean_and_sd(&xs);
        let (my, sy) = mean_and_sd(&ys);
        let n = xs.len() as f64;
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / (n - 1.0);
        let corr = cov / (sx * sy);
        assert!((corr - 0.9).abs() < 0.03, "corr {corr}");
    }

    #[test]
    fn conjugate_normal_mean_posterior() {
        // y_i ~ N(theta, sigma²) with theta ~ N(0, tau²): the posterior for
        // theta is normal with closed-form mean and variance.
        struct Conjugate {
            ys: Vec<f64>,
            sigma: f64,
            tau: f64,
        }
        impl LogDensity for Conjugate {
            fn dim(&self) -> usize {
                1
            }
            fn logp_and_grad(&self, pos: &[f64], grad: &mut [f64]) -> f64 {
                let theta = pos[0];
                let mut lp = -0.5 * theta * theta / (self.tau * self.tau);
                let mut g = -theta / (self.tau * self.tau);
                for y in &self.ys {
                    lp += -0.5 * (y - theta).powi(2) / (self.sigma * self.sigma);
                    g += (y - theta) / (self.sigma * self.sigma);
                }
                grad[0] = g;
                lp
            }
        }
        let ys = vec![1.2, 0.7, 1.9, 0.4, 1.1, 1.6, 0.8, 1.3];
        let (sigma, tau) = (0.8, 2.0);
        let n = ys.len() as f64;
        let sum: f64 = ys.iter().sum();
        let post_var = 1.0 / (n / (sigma * sigma) + 1.0 / (tau * tau));
        let post_mean = post_var * sum / (sigma * sigma);

        let target = Conjugate { ys, sigma, tau };
        let config = SamplerConfig {
            sampling_iters: 4000,
            ..SamplerConfig::desk(11)
        };
        let draws = run(&target, &config, &InitStrategy::Jittered).unwrap();
        let flat: Vec<f64> = draws.column(0).into_iter().flatten().collect();
        let (mean, sd) = mean_and_sd(&flat);
        let mc_se = post_var.sqrt() / (flat.len() as f64).sqrt();
        // Autocorrelation inflates the true MC error; allow a generous
        // multiple of the iid standard error.
        assert!(
            (mean - post_mean).abs() < 3.0 * 3.0 * mc_se,
            "mean {mean} vs {post_mean}"
        );
        assert!((sd - post_var.sqrt()).abs() / post_var.sqrt() < 0.1);
    }

    #[test]
    fn identical_configuration_is_bit_identical() {
        let target = Gaussian { dim: 3, rho: 0.0 };
        let config = SamplerConfig {
            warmup_iters: 200,
            sampling_iters: 300,
            ..SamplerConfig::desk(5)
        };
        let a = run(&target, &config, &InitStrategy::Jittered).unwrap();
        let b = run(&target, &config, &InitStrategy::Jittered).unwrap();
        assert_eq!(a, b);
        let other_seed = SamplerConfig { seed: 6, ..config };
        let c = run(&target, &other_seed, &InitStrategy::Jittered).unwrap();
        assert_ne!(a.chains[0].draws, c.chains[0].draws);
    }

    #[test]
    fn initialization_ranges_respected() {
        struct WithLatent;
        impl LogDensity for WithLatent {
            fn dim(&self) -> usize {
                6
            }
            fn logp_and_grad(&self, _: &[f64], g: &mut [f64]) -> f64 {
                g.fill(0.0);
                0.0
            }
            fn latent_range(&self) -> Option<std::ops::Range<usize>> {
                Some(3..6)
            }
        }
        let mut rng = stream(1, StreamPurpose::Test, 9, 0);
        for _ in 0..50 {
            let p = initialize(&WithLatent, &InitStrategy::Jittered, &mut rng);
            for (i, v) in p.iter().enumerate() {
                if i < 3 {
                    assert!((-2.0..2.0).contains(v));
                } else {
                    let u = 1.0 / (1.0 + (-v).exp());
                    assert!((0.05..0.95).contains(&u));
                }
            }
        }
        let fixed = initialize(&WithLatent, &InitStrategy::Fixed(vec![0.5; 6]), &mut rng);
        assert_eq!(fixed, vec![0.5; 6]);
    }

    #[test]
    fn initialization_failure_is_hard_error() {
        struct Hostile;
        impl LogDensity for Hostile {
            fn dim(&self) -> usize {
                2
            }
            fn logp_and_grad(&self, _: &[f64], _: &mut [f64]) -> f64 {
                f64::NEG_INFINITY
            }
        }
        let config = SamplerConfig::desk(1);
        let err = run(&Hostile, &config, &InitStrategy::Jittered).unwrap_err();
        assert!(matches!(err, Error::SamplerInit { attempts: 100 }));
    }
}
