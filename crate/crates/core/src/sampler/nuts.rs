//! Single-chain No-U-Turn transitions with dual-averaging step-size
//! adaptation and diagonal mass-matrix estimation over expanding warm-up
//! windows.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LogDensity;

/// Energy error beyond which a trajectory counts as divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Clone)]
pub(super) struct State {
    pub pos: Vec<f64>,
    pub mom: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

pub(super) struct Chain<'a, T: LogDensity + ?Sized> {
    target: &'a T,
    dim: usize,
    pub pos: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
    pub inv_mass: Vec<f64>,
    mass_sd: Vec<f64>,
    pub step_size: f64,
    max_depth: usize,
    pub rng: ChaCha8Rng,
}

pub(super) struct StepInfo {
    pub divergent: bool,
    pub hit_max_depth: bool,
    /// Mean Metropolis acceptance statistic over the trajectory.
    pub accept_stat: f64,
}

impl<'a, T: LogDensity + ?Sized> Chain<'a, T> {
    pub fn new(target: &'a T, init: Vec<f64>, rng: ChaCha8Rng, max_depth: usize) -> Option<Self> {
        let dim = target.dim();
        let mut grad = vec![0.0; dim];
        let logp = target.logp_and_grad(&init, &mut grad);
        if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some(Self {
            target,
            dim,
            pos: init,
            grad,
            logp,
            inv_mass: vec![1.0; dim],
            mass_sd: vec![1.0; dim],
            step_size: 1.0,
            max_depth,
            rng,
        })
    }

    pub fn set_inv_mass(&mut self, inv_mass: Vec<f64>) {
        debug_assert_eq!(inv_mass.len(), self.dim);
        self.mass_sd = inv_mass.iter().map(|v| 1.0 / v.sqrt()).collect();
        self.inv_mass = inv_mass;
    }

    fn kinetic(&self, mom: &[f64]) -> f64 {
        0.5 * mom
            .iter()
            .zip(&self.inv_mass)
            .map(|(p, im)| p * p * im)
            .sum::<f64>()
    }

    fn sample_momentum(&mut self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.rng.sample::<f64, _>(StandardNormal) * self.mass_sd[i])
            .collect()
    }

    /// One leapfrog step of size `eps` in place; returns the new log density.
    fn leapfrog(&self, state: &mut State, eps: f64) -> f64 {
        for i in 0..self.dim {
            state.mom[i] += 0.5 * eps * state.grad[i];
        }
        for i in 0..self.dim {
            state.pos[i] += eps * self.inv_mass[i] * state.mom[i];
        }
        let logp = self.target.logp_and_grad(&state.pos, &mut state.grad);
        if logp.is_finite() {
            for i in 0..self.dim {
                state.mom[i] += 0.5 * eps * state.grad[i];
            }
        }
        state.logp = logp;
        logp
    }

    fn uturn(&self, minus: &State, plus: &State) -> bool {
        let mut dot_minus = 0.0;
        let mut dot_plus = 0.0;
        for i in 0..self.dim {
            let diff = plus.pos[i] - minus.pos[i];
            dot_minus += diff * self.inv_mass[i] * minus.mom[i];
            dot_plus += diff * self.inv_mass[i] * plus.mom[i];
        }
        dot_minus < 0.0 || dot_plus < 0.0
    }

    /// Pick a starting step size by doubling/halving until the one-step
    /// acceptance probability crosses 1/2.
    pub fn find_reasonable_step_size(&mut self) -> f64 {
        let mut eps = 1.0f64;
        let mom = self.sample_momentum();
        let joint0 = self.logp - self.kinetic(&mom);
        let mut trial = State {
            pos: self.pos.clone(),
            mom: mom.clone(),
            grad: self.grad.clone(),
            logp: self.logp,
        };
        let mut log_ratio = {
            self.leapfrog(&mut trial, eps);
            trial.logp - self.kinetic(&trial.mom) - joint0
        };
        // Shrink first if the step exploded.
        let mut guard = 0;
        while !log_ratio.is_finite() && guard < 60 {
            eps *= 0.5;
            trial.pos.copy_from_slice(&self.pos);
            trial.mom.copy_from_slice(&mom);
            trial.grad.copy_from_slice(&self.grad);
            self.leapfrog(&mut trial, eps);
            log_ratio = trial.logp - self.kinetic(&trial.mom) - joint0;
            guard += 1;
        }
        if !log_ratio.is_finite() {
            self.step_size = 1e-6;
            return self.step_size;
        }
        let dir: f64 = if log_ratio > (0.5f64).ln() { 1.0 } else { -1.0 };
        let mut guard = 0;
        while dir * log_ratio > -dir * std::f64::consts::LN_2 && guard < 60 {
            eps *= 2.0f64.powf(dir);
            trial.pos.copy_from_slice(&self.pos);
            trial.mom.copy_from_slice(&mom);
            trial.grad.copy_from_slice(&self.grad);
            self.leapfrog(&mut trial, eps);
            log_ratio = trial.logp - self.kinetic(&trial.mom) - joint0;
            if !log_ratio.is_finite() {
                eps *= 0.5;
                break;
            }
            guard += 1;
        }
        self.step_size = eps.clamp(1e-10, 1e7);
        self.step_size
    }

    /// One NUTS transition: dynamic doubling with multinomial selection and
    /// biased progressive sampling across subtrees.
    pub fn step(&mut self) -> StepInfo {
        let mom0 = self.sample_momentum();
        let joint0 = self.logp - self.kinetic(&mom0);
        let start = State {
            pos: self.pos.clone(),
            mom: mom0,
            grad: self.grad.clone(),
            logp: self.logp,
        };

        let mut minus = start.clone();
        let mut plus = start.clone();
        let mut proposal = start;
        let mut log_w = 0.0f64; // log weight of the trajectory so far
        let mut alpha_sum = 0.0f64;
        let mut n_alpha = 0.0f64;
        let mut divergent = false;
        let mut depth = 0usize;

        while depth < self.max_depth {
            let dir: f64 = if self.rng.random::<bool>() { 1.0 } else { -1.0 };
            let sub = if dir > 0.0 {
                self.build_tree(depth, dir, plus.clone(), joint0)
            } else {
                self.build_tree(depth, dir, minus.clone(), joint0)
            };
            alpha_sum += sub.alpha_sum;
            n_alpha += sub.n_alpha;
            if sub.divergent {
                divergent = true;
                break;
            }
            if sub.turned {
                break;
            }
            // Biased progressive sampling favors the fresh subtree.
            if (self.rng.random::<f64>()).ln() < sub.log_w - log_w {
                proposal = sub.proposal.clone();
            }
            log_w = log_sum_exp(log_w, sub.log_w);
            if dir > 0.0 {
                plus = sub.front;
            } else {
                minus = sub.front;
            }
            depth += 1;
            if self.uturn(&minus, &plus) {
                break;
            }
        }

        self.pos = proposal.pos;
        self.grad = proposal.grad;
        self.logp = proposal.logp;
        StepInfo {
            divergent,
            hit_max_depth: depth == self.max_depth,
            accept_stat: if n_alpha > 0.0 { alpha_sum / n_alpha } else { 0.0 },
        }
    }

    fn build_tree(&mut self, depth: usize, dir: f64, from: State, joint0: f64) -> Tree {
        if depth == 0 {
            let mut state = from;
            self.leapfrog(&mut state, dir * self.step_size);
            let log_w = if state.logp.is_finite() {
                state.logp - self.kinetic(&state.mom) - joint0
            } else {
                f64::NEG_INFINITY
            };
            let divergent = !(log_w > -DIVERGENCE_THRESHOLD);
            let alpha = log_w.min(0.0).exp();
            return Tree {
                front: state.clone(),
                back: state.clone(),
                proposal: state,
                log_w,
                alpha_sum: alpha,
                n_alpha: 1.0,
                divergent,
                turned: false,
            };
        }

        let mut first = self.build_tree(depth - 1, dir, from, joint0);
        if first.divergent || first.turned {
            return first;
        }
        let second = self.build_tree(depth - 1, dir, first.front.clone(), joint0);
        first.alpha_sum += second.alpha_sum;
        first.n_alpha += second.n_alpha;
        if second.divergent || second.turned {
            first.divergent = second.divergent;
            first.turned = second.turned;
            return first;
        }
        let total = log_sum_exp(first.log_w, second.log_w);
        // Uniform multinomial choice between the two halves.
        if (self.rng.random::<f64>()).ln() < second.log_w - total {
            first.proposal = second.proposal;
        }
        first.log_w = total;
        first.front = second.front;
        // In time order: back end of the combined tree is the first
        // subtree's back when moving forward, and vice versa.
        let (minus, plus) = if dir > 0.0 {
            (&first.back, &first.front)
        } else {
            (&first.front, &first.back)
        };
        first.turned = self.uturn(minus, plus);
        first
    }
}

struct Tree {
    /// Far end of the subtree along the integration direction.
    front: State,
    /// Near end (where the subtree was started from).
    back: State,
    proposal: State,
    log_w: f64,
    alpha_sum: f64,
    n_alpha: f64,
    divergent: bool,
    turned: bool,
}

#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Nesterov-style dual averaging of the log step size.
pub(super) struct DualAverage {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    m: f64,
    target_accept: f64,
}

impl DualAverage {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target_accept: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            m: 0.0,
            target_accept,
        }
    }

    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.m += 1.0;
        let eta = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target_accept - accept_stat);
        self.log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let weight = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = weight * self.log_eps + (1.0 - weight) * self.log_eps_bar;
        self.log_eps.exp()
    }

    pub fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Warm-up layout: fast interval, expanding slow windows, fast tail.
pub(super) struct WarmupSchedule {
    pub init_end: usize,
    pub term_start: usize,
    /// Iteration indices (exclusive) at which each slow window closes.
    pub window_ends: Vec<usize>,
}

impl WarmupSchedule {
    pub fn plan(warmup: usize) -> Self {
        let init_end = ((warmup as f64) * 0.15).round() as usize;
        let term_len = ((warmup as f64) * 0.10).round() as usize;
        let term_start = warmup.saturating_sub(term_len);
        let mut window_ends = Vec::new();
        if term_start > init_end {
            let mut start = init_end;
            let mut size = 25usize.min(term_start - init_end);
            loop {
                let remaining = term_start - start;
                if remaining == 0 {
                    break;
                }
                // Absorb the tail if the next doubling would overshoot.
                if size * 3 > remaining {
                    size = remaining;
                }
                start += size;
                window_ends.push(start);
                size *= 2;
            }
        }
        Self {
            init_end,
            term_start,
            window_ends,
        }
    }
}

/// Streaming mean/variance for mass-matrix estimation.
pub(super) struct RunningVariance {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    pub fn count(&self) -> f64 {
        self.n
    }

    /// Regularized variance estimate, shrunk toward a small diagonal the
    /// same way Stan regularizes its windowed estimator.
    pub fn regularized(&self) -> Vec<f64> {
        let n = self.n.max(2.0);
        let shrink = n / (n + 5.0);
        self.m2
            .iter()
            .map(|m2| (shrink * (m2 / (n - 1.0)) + 1e-3 * (1.0 - shrink)).max(1e-10))
            .collect()
    }

    pub fn reset(&mut self) {
        self.n = 0.0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::rng::{stream, StreamPurpose};

    struct StdNormal {
        dim: usize,
    }

    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.dim
        }
        fn logp_and_grad(&self, pos: &[f64], grad: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for i in 0..self.dim {
                lp -= 0.5 * pos[i] * pos[i];
                grad[i] = -pos[i];
            }
            lp
        }
    }

    #[test]
    fn leapfrog_conserves_energy_at_tiny_step() {
        let target = StdNormal { dim: 5 };
        let rng = stream(1, StreamPurpose::Test, 0, 0);
        let mut chain = Chain::new(&target, vec![0.3; 5], rng, 10).unwrap();
        chain.step_size = 1e-4;
        let mom: Vec<f64> = (0..5).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let mut state = State {
            pos: chain.pos.clone(),
            mom: mom.clone(),
            grad: chain.grad.clone(),
            logp: chain.logp,
        };
        let h0 = -state.logp + chain.kinetic(&state.mom);
        for _ in 0..100 {
            chain.leapfrog(&mut state, 1e-4);
        }
        let h1 = -state.logp + chain.kinetic(&state.mom);
        assert!((h1 - h0).abs() < 1e-6, "energy drift {}", (h1 - h0).abs());
    }

    #[test]
    fn warmup_schedule_covers_whole_range() {
        for warmup in [500usize, 1000, 5000, 77, 20] {
            let plan = WarmupSchedule::plan(warmup);
            assert!(plan.init_end <= plan.term_start);
            assert!(plan.term_start <= warmup);
            if let Some(last) = plan.window_ends.last() {
                assert_eq!(*last, plan.term_start);
            }
            let mut prev = plan.init_end;
            for w in &plan.window_ends {
                assert!(*w > prev);
                prev = *w;
            }
        }
        // The canonical 500-iteration desk plan: 75 fast, windows
        // 25/50/100/200, 50 fast.
        let plan = WarmupSchedule::plan(500);
        assert_eq!(plan.init_end, 75);
        assert_eq!(plan.term_start, 450);
        assert_eq!(plan.window_ends, vec![100, 150, 250, 450]);
    }

    #[test]
    fn no_divergences_on_gaussian_target() {
        let target = StdNormal { dim: 4 };
        let rng = stream(3, StreamPurpose::Test, 0, 0);
        let mut chain = Chain::new(&target, vec![0.5; 4], rng, 10).unwrap();
        chain.find_reasonable_step_size();
        let mut da = DualAverage::new(chain.step_size, 0.8);
        for _ in 0..200 {
            let info = chain.step();
            chain.step_size = da.update(info.accept_stat);
        }
        chain.step_size = da.adapted();
        for _ in 0..500 {
            let info = chain.step();
            assert!(!info.divergent, "divergence on a quadratic target");
        }
    }

    #[test]
    fn running_variance_matches_two_pass() {
        let xs: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.1, (i as f64).sin()])
            .collect();
        let mut rv = RunningVariance::new(2);
        for x in &xs {
            rv.push(x);
        }
        for d in 0..2 {
            let mean = xs.iter().map(|x| x[d]).sum::<f64>() / 50.0;
            let var = xs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / 49.0;
            let shrunk = (50.0 / 55.0) * var + 1e-3 * (5.0 / 55.0);
            assert!((rv.regularized()[d] - shrunk).abs() < 1e-12);
        }
    }
}
