//! Trial-level quantities derived from raw draws: success probabilities,
//! subtrial log odds ratios, interval summaries, and go/no-go decisions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    logistic, Dataset, Direction, ModelSpec, ParameterVector, ResponderRule, SubjectRecord,
};
use crate::numkit::{equal_tailed, hdi, std_bvn_upper, std_normal_cdf, HdInterval};
use crate::sampler::{scalar_rhat, PosteriorDraws};

/// Which subjects enter the arm-level success-probability averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArmAverage {
    /// Average each arm's probabilities over that arm's observed members.
    ObservedArms,
    /// Average both arms' probabilities over every subtrial member,
    /// treating each subject counterfactually as treated and as control.
    Counterfactual,
}

/// Interval flavor for summaries; the highest-density interval is the
/// default decision rule, the equal-tailed variant exists for sensitivity
/// analysis only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalKind {
    Hdi,
    EqualTailed,
}

/// Decision summary for one subtrial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtrialSummary {
    pub subtrial: usize,
    pub lor_mean: f64,
    pub lor_hdi: HdInterval,
    /// Lower interval limit strictly above zero.
    pub success: bool,
    pub n_draws: usize,
    pub lor_var: f64,
    /// Set when the posterior mean fell outside the interval, which a
    /// unimodal draw set cannot produce.
    pub multimodality_warning: bool,
}

/// Per-subtrial log-odds-ratio draws plus clamp accounting.
#[derive(Debug, Clone)]
pub struct LorDraws {
    /// `per_subtrial[k][chain][iter]`.
    pub per_subtrial: Vec<Vec<Vec<f64>>>,
    /// Draws where an arm probability had to be clamped away from 0 or 1.
    pub clamp_count: usize,
}

impl LorDraws {
    pub fn flat(&self, k: usize) -> Vec<f64> {
        self.per_subtrial[k].iter().flatten().copied().collect()
    }

    /// Largest split-R̂ across the subtrial log odds ratios.
    pub fn max_rhat(&self) -> f64 {
        self.per_subtrial
            .iter()
            .map(|chains| scalar_rhat(chains))
            .fold(1.0, f64::max)
    }
}

const PROB_CLAMP: f64 = 1e-12;

/// Success probability of one subject under one joint-model draw:
/// the bivariate-normal orthant above the responder threshold and zero.
pub fn success_probability_abba(
    draw: &ParameterVector,
    subject: &SubjectRecord,
    rule: &ResponderRule,
) -> f64 {
    let lay = draw.layout();
    let pos = draw.values();
    let k = subject.subtrial - 1;
    let lx = subject.baseline.ln();
    let t = f64::from(subject.treatment);
    let mu1 = pos[lay.coef(0, k, 0)] + pos[lay.coef(1, k, 0)] * lx + pos[lay.coef(2, k, 0)] * t;
    let mu2 = pos[lay.coef(0, k, 1)] + pos[lay.coef(1, k, 1)] * lx + pos[lay.coef(2, k, 1)] * t;
    let sigma1 = pos[lay.sigma1_coord(k)].exp();
    let rho = pos[lay.rho_coord(k)].tanh();
    joint_success_prob(mu1, mu2, sigma1, rho, rule)
}

#[inline]
pub(crate) fn joint_success_prob(
    mu1: f64,
    mu2: f64,
    sigma1: f64,
    rho: f64,
    rule: &ResponderRule,
) -> f64 {
    let h = (rule.threshold - mu1) / sigma1;
    let upper = std_bvn_upper(h, -mu2, rho);
    match rule.direction {
        Direction::Above => upper,
        // P(Y1 < a, Y2* > 0) via the complementary decomposition.
        Direction::Below => (std_normal_cdf(mu2) - upper).clamp(0.0, 1.0),
    }
}

/// Success probability of one subject under one binary-model draw.
pub fn success_probability_bin(draw: &ParameterVector, subject: &SubjectRecord) -> f64 {
    let lay = draw.layout();
    let pos = draw.values();
    let k = subject.subtrial - 1;
    let xi = pos[lay.coef(0, k, 0)]
        + pos[lay.coef(1, k, 0)] * subject.baseline.ln()
        + pos[lay.coef(2, k, 0)] * f64::from(subject.treatment);
    logistic(xi)
}

/// Per-draw subtrial log odds ratios from arm-averaged success
/// probabilities.
pub fn log_odds_ratio_draws(
    draws: &PosteriorDraws,
    data: &Dataset,
    spec: &ModelSpec,
) -> Result<LorDraws> {
    log_odds_ratio_draws_with(draws, data, spec, ArmAverage::ObservedArms)
}

pub fn log_odds_ratio_draws_with(
    draws: &PosteriorDraws,
    data: &Dataset,
    spec: &ModelSpec,
    averaging: ArmAverage,
) -> Result<LorDraws> {
    log_odds_ratio_draws_oriented(draws, data, spec, averaging, false)
}

/// As [`log_odds_ratio_draws_with`], with the ratio orientation explicit:
/// `swap_arms` puts the control mean in the numerator, which negates every
/// draw exactly. Relabeling the arms of a trial is this swap.
pub fn log_odds_ratio_draws_oriented(
    draws: &PosteriorDraws,
    data: &Dataset,
    spec: &ModelSpec,
    averaging: ArmAverage,
    swap_arms: bool,
) -> Result<LorDraws> {
    let lay = crate::models::Layout::for_spec(spec, data.len())?;
    if lay.dim != draws.dim() {
        return Err(Error::Validation(format!(
            "draw matrix has {} coordinates but the model/dataset needs {}",
            draws.dim(),
            lay.dim
        )));
    }
    let kk = spec.n_subtrials;

    // Group subjects once; an empty arm leaves its rate undefined.
    let mut arms: Vec<[Vec<&SubjectRecord>; 2]> = (0..kk).map(|_| [Vec::new(), Vec::new()]).collect();
    for r in data.records() {
        arms[r.subtrial - 1][r.treatment as usize].push(r);
    }
    for (k, arm) in arms.iter().enumerate() {
        for t in 0..2 {
            if matches!(averaging, ArmAverage::ObservedArms) && arm[t].is_empty() {
                return Err(Error::Validation(format!(
                    "subtrial {} has no {} subjects; its log odds ratio is undefined",
                    k + 1,
                    if t == 1 { "treatment" } else { "control" }
                )));
            }
        }
    }

    let joint = spec.kind.is_joint();
    let mut clamp_count = 0usize;
    let mut per_subtrial: Vec<Vec<Vec<f64>>> =
        (0..kk).map(|_| Vec::with_capacity(draws.n_chains())).collect();

    for chain in 0..draws.n_chains() {
        let mut chain_lors: Vec<Vec<f64>> =
            (0..kk).map(|_| Vec::with_capacity(draws.n_draws)).collect();
        for iter in 0..draws.n_draws {
            let pos = draws.draw(chain, iter);
            for k in 0..kk {
                let (sigma1, rho) = if joint {
                    (pos[lay.sigma1_coord(k)].exp(), pos[lay.rho_coord(k)].tanh())
                } else {
                    (1.0, 0.0)
                };
                let prob = |subject: &SubjectRecord, as_treated: f64| -> f64 {
                    let lx = subject.baseline.ln();
                    if joint {
                        let mu1 = pos[lay.coef(0, k, 0)]
                            + pos[lay.coef(1, k, 0)] * lx
                            + pos[lay.coef(2, k, 0)] * as_treated;
                        let mu2 = pos[lay.coef(0, k, 1)]
                            + pos[lay.coef(1, k, 1)] * lx
                            + pos[lay.coef(2, k, 1)] * as_treated;
                        joint_success_prob(mu1, mu2, sigma1, rho, &spec.rule)
                    } else {
                        logistic(
                            pos[lay.coef(0, k, 0)]
                                + pos[lay.coef(1, k, 0)] * lx
                                + pos[lay.coef(2, k, 0)] * as_treated,
                        )
                    }
                };
                let (r_t, r_c) = match averaging {
                    ArmAverage::ObservedArms => {
                        let mean_arm = |t: usize| -> f64 {
                            let subjects = &arms[k][t];
                            subjects.iter().map(|s| prob(s, t as f64)).sum::<f64>()
                                / subjects.len() as f64
                        };
                        (mean_arm(1), mean_arm(0))
                    }
                    ArmAverage::Counterfactual => {
                        let all: Vec<&SubjectRecord> =
                            arms[k][0].iter().chain(arms[k][1].iter()).copied().collect();
                        let n = all.len() as f64;
                        let rt = all.iter().map(|s| prob(s, 1.0)).sum::<f64>() / n;
                        let rc = all.iter().map(|s| prob(s, 0.0)).sum::<f64>() / n;
                        (rt, rc)
                    }
                };
                let mut clamp = |r: f64| -> f64 {
                    if r < PROB_CLAMP || r > 1.0 - PROB_CLAMP {
                        clamp_count += 1;
                        r.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
                    } else {
                        r
                    }
                };
                let (r_t, r_c) = if swap_arms { (r_c, r_t) } else { (r_t, r_c) };
                let r_t = clamp(r_t);
                let r_c = clamp(r_c);
                chain_lors[k].push((r_t / (1.0 - r_t)).ln() - (r_c / (1.0 - r_c)).ln());
            }
        }
        for (k, lors) in chain_lors.into_iter().enumerate() {
            per_subtrial[k].push(lors);
        }
    }
    Ok(LorDraws {
        per_subtrial,
        clamp_count,
    })
}

/// Interval-plus-decision summary of one subtrial's draws.
pub fn summarize(subtrial: usize, lambda_draws: &[f64], mass: f64) -> Result<SubtrialSummary> {
    summarize_with(subtrial, lambda_draws, mass, IntervalKind::Hdi)
}

pub fn summarize_with(
    subtrial: usize,
    lambda_draws: &[f64],
    mass: f64,
    interval: IntervalKind,
) -> Result<SubtrialSummary> {
    if lambda_draws.is_empty() {
        return Err(Error::Domain("cannot summarize an empty draw set".into()));
    }
    let n = lambda_draws.len();
    let mean = lambda_draws.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        lambda_draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let iv = match interval {
        IntervalKind::Hdi => hdi(lambda_draws, mass)?,
        IntervalKind::EqualTailed => equal_tailed(lambda_draws, mass)?,
    };
    Ok(SubtrialSummary {
        subtrial,
        lor_mean: mean,
        success: iv.low > 0.0,
        multimodality_warning: !(iv.low <= mean && mean <= iv.high),
        lor_hdi: iv,
        n_draws: n,
        lor_var: var,
    })
}

/// Full decision pipeline for a fitted model: λ draws, per-subtrial
/// summaries, and the largest λ split-R̂.
pub fn summarize_fit(
    draws: &PosteriorDraws,
    data: &Dataset,
    spec: &ModelSpec,
    mass: f64,
) -> Result<(Vec<SubtrialSummary>, LorDraws)> {
    let lor = log_odds_ratio_draws(draws, data, spec)?;
    let mut summaries = Vec::with_capacity(spec.n_subtrials);
    for k in 0..spec.n_subtrials {
        summaries.push(summarize(k + 1, &lor.flat(k), mass)?);
    }
    Ok((summaries, lor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Layout, ModelKind};
    use approx::assert_abs_diff_eq;

    fn joint_draw(sigma1: f64, rho: f64, coefs: [[f64; 2]; 3]) -> ParameterVector {
        let spec = ModelSpec::new(ModelKind::AbbaStratified, 1);
        let lay = Layout::for_spec(&spec, 1).unwrap();
        let mut v = vec![0.0; lay.dim];
        for (which, pair) in coefs.iter().enumerate() {
            v[lay.coef(which, 0, 0)] = pair[0];
            v[lay.coef(which, 0, 1)] = pair[1];
        }
        v[lay.sigma1_coord(0)] = sigma1.ln();
        v[lay.rho_coord(0)] = rho.atanh();
        ParameterVector::new(lay, v).unwrap()
    }

    fn subject(t: u8, x: f64) -> SubjectRecord {
        SubjectRecord {
            subtrial: 1,
            treatment: t,
            baseline: x,
            y_continuous: 0.0,
            y_binary: 0,
        }
    }

    #[test]
    fn independence_factorization() {
        let rule = ResponderRule::default();
        // mu1 = threshold exactly, mu2 = 0, rho = 0: both events sit at
        // their medians, so the orthant is 1/4.
        let draw = joint_draw(1.0, 0.0, [[rule.threshold, 0.0], [0.0, 0.0], [0.0, 0.0]]);
        let p = success_probability_abba(&draw, &subject(0, 1.0), &rule);
        assert_abs_diff_eq!(p, 0.25, epsilon = 1e-10);

        let draw = joint_draw(0.7, 0.0, [[2.0, 0.4], [0.3, -0.1], [0.2, 0.1]]);
        let s = subject(1, 2.0);
        let p = success_probability_abba(&draw, &s, &rule);
        let mu1 = 2.0 + 0.3 * 2.0f64.ln() + 0.2;
        let mu2 = 0.4 - 0.1 * 2.0f64.ln() + 0.1;
        let expected =
            (1.0 - std_normal_cdf((rule.threshold - mu1) / 0.7)) * (1.0 - std_normal_cdf(-mu2));
        assert_abs_diff_eq!(p, expected, epsilon = 1e-10);
    }

    #[test]
    fn monte_carlo_oracle_for_success_probability() {
        use crate::numkit::{sample_bvn, Correlation2, Cov2};
        use rand::SeedableRng;
        let rule = ResponderRule::default();
        let draw = joint_draw(0.5, 0.3, [[2.7, 0.4], [0.5, -0.1], [0.5, 0.3]]);
        let s = subject(1, 1.7);
        let p = success_probability_abba(&draw, &s, &rule);

        let mu1 = 2.7 + 0.5 * 1.7f64.ln() + 0.5;
        let mu2 = 0.4 - 0.1 * 1.7f64.ln() + 0.3;
        let cov = Cov2::new(0.5, Correlation2::new(0.3).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let n = 1_000_000usize;
        let mut hits = 0usize;
        for _ in 0..n {
            let (y1, y2) = sample_bvn(mu1, mu2, &cov, &mut rng);
            if y1 > rule.threshold && y2 > 0.0 {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let se = (mc * (1.0 - mc) / n as f64).sqrt();
        assert!((p - mc).abs() < 3.0 * se, "analytic {p} vs mc {mc}");
    }

    #[test]
    fn below_direction_flips_the_continuous_event() {
        let rule = ResponderRule {
            threshold: 2.6,
            direction: Direction::Below,
            success_requires_no_failure: true,
        };
        let draw = joint_draw(0.8, 0.4, [[2.0, 0.6], [0.0, 0.0], [0.0, 0.0]]);
        let s = subject(0, 1.0);
        let below = success_probability_abba(&draw, &s, &rule);
        let above = success_probability_abba(
            &draw,
            &s,
            &ResponderRule {
                direction: Direction::Above,
                ..rule
            },
        );
        // The two events partition {Y2* > 0}.
        assert_abs_diff_eq!(below + above, std_normal_cdf(0.6), epsilon = 1e-10);
    }

    #[test]
    fn bin_success_probability_is_stable_inverse_logit() {
        let spec = ModelSpec::new(ModelKind::BinStratified, 1);
        let lay = Layout::for_spec(&spec, 1).unwrap();
        let mut v = vec![0.0; lay.dim];
        let s = subject(0, 1.0);
        let p = success_probability_bin(&ParameterVector::new(lay.clone(), v.clone()).unwrap(), &s);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);

        // Far in the saturated regime the stable form neither overflows
        // nor produces NaN; in double precision it rounds to 1.
        v[lay.coef(0, 0, 0)] = 40.0;
        let p = success_probability_bin(&ParameterVector::new(lay.clone(), v.clone()).unwrap(), &s);
        assert!(p.is_finite() && (1.0 - p).abs() <= 1e-15);

        for xi in [-3.0f64, -0.7, 0.0, 1.3, 5.0] {
            v[lay.coef(0, 0, 0)] = xi;
            let p = success_probability_bin(&ParameterVector::new(lay.clone(), v.clone()).unwrap(), &s);
            assert_abs_diff_eq!(p, 1.0 / (1.0 + (-xi).exp()), epsilon = 1e-15);
        }
    }

    #[test]
    fn summarize_constant_and_symmetric_draws() {
        let s = summarize(1, &vec![0.7; 50], 0.95).unwrap();
        assert!(s.success);
        assert_eq!(s.lor_hdi.low, 0.7);
        assert_eq!(s.lor_hdi.high, 0.7);
        assert!(s.lor_var < 1e-30);

        let sym: Vec<f64> = (-100..=100).map(|i| i as f64 / 50.0).collect();
        let s = summarize(1, &sym, 0.95).unwrap();
        assert!(!s.success);
        assert!(!s.multimodality_warning);
    }

    #[test]
    fn summarize_normal_draws_match_quantiles() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| 1.0 + 0.25 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let s = summarize(2, &draws, 0.95).unwrap();
        assert!((s.lor_hdi.low - 0.51).abs() < 0.02);
        assert!((s.lor_hdi.high - 1.49).abs() < 0.02);
        assert!(s.success);
        assert_abs_diff_eq!(s.lor_mean, 1.0, epsilon = 0.01);
    }
}
