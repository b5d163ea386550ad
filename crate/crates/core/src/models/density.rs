//! Unnormalized log posteriors and analytic gradients for the four models.
//!
//! Joint kinds augment each subject with a latent coordinate `u ∈ (0,1)`
//! stored on the logit scale. The latent value itself is reconstructed
//! through the inverse CDF of the conditional truncated normal; because that
//! construction maps the uniform exactly onto the truncated conditional, the
//! subject's contribution reduces to the continuous likelihood, the log
//! truncation mass of the constrained region, and the logit Jacobian — which
//! together integrate the latent coordinate out correctly.

use crate::error::{Error, Result};
use crate::models::params::{logistic, Layout, ParameterVector};
use crate::models::types::{Dataset, ModelSpec, SubjectRecord};
use crate::numkit::{log_std_normal_cdf, mills_ratio, truncated_std_normal_inv_cdf};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Subject data predigested for density evaluation.
#[derive(Debug, Clone)]
struct PrepSubject {
    k: u32,
    t: f64,
    lx: f64,
    y1: f64,
    /// Latent constrained to (0, inf) (no failure event).
    up: bool,
    /// Responder indicator under the model's rule (binary kinds).
    resp: f64,
}

/// A model bound to a dataset: the log-density target handed to the sampler.
#[derive(Debug, Clone)]
pub struct PosteriorDensity {
    spec: ModelSpec,
    layout: Layout,
    subjects: Vec<PrepSubject>,
}

impl PosteriorDensity {
    pub fn new(spec: &ModelSpec, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        if data.n_subtrials() != spec.n_subtrials {
            return Err(Error::Validation(format!(
                "model expects {} subtrials but the dataset has {}",
                spec.n_subtrials,
                data.n_subtrials()
            )));
        }
        let layout = Layout::for_spec(spec, data.len())?;
        let subjects: Vec<PrepSubject> = data
            .records()
            .iter()
            .map(|r| PrepSubject {
                k: (r.subtrial - 1) as u32,
                t: f64::from(r.treatment),
                lx: r.baseline.ln(),
                y1: r.y_continuous,
                up: r.y_binary == 0,
                resp: f64::from(spec.rule.is_responder(r.y_continuous, r.y_binary)),
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            layout,
            subjects,
        })
    }

    #[inline]
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    #[inline]
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    /// Log posterior and, when `grad` is given, its gradient in
    /// unconstrained coordinates. A non-finite return means the point is
    /// outside the supported region; gradient contents are then unspecified.
    pub fn logp_grad(&self, pos: &[f64], grad: Option<&mut [f64]>) -> f64 {
        assert_eq!(pos.len(), self.layout.dim, "position dimension mismatch");
        if self.spec.kind.is_joint() {
            self.joint_logp_grad(pos, grad)
        } else {
            self.binary_logp_grad(pos, grad)
        }
    }

    fn joint_logp_grad(&self, pos: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let lay = &self.layout;
        let pri = &self.spec.priors;
        let kk = lay.n_subtrials;
        let hier = self.spec.kind.is_hierarchical();
        let mut g = grad;
        if let Some(buf) = g.as_deref_mut() {
            buf.fill(0.0);
        }

        // Per-subtrial scale parameters on the constrained scale.
        let mut scales = Vec::with_capacity(kk);
        for k in 0..kk {
            let s1 = pos[lay.sigma1_coord(k)].exp();
            let rho = pos[lay.rho_coord(k)].tanh();
            if !(s1.is_finite() && s1 > 0.0) {
                return f64::NEG_INFINITY;
            }
            let sc = (1.0 - rho * rho).sqrt();
            if !(sc > 0.0) {
                return f64::NEG_INFINITY;
            }
            scales.push((s1, rho, sc));
        }

        // Likelihood plus latent Jacobians, accumulated per subtrial so the
        // stratified posterior decomposes into per-subtrial sums exactly.
        let mut lp_k = vec![0.0f64; kk];
        let mut d_sigma1 = vec![0.0f64; kk];
        let mut d_rho = vec![0.0f64; kk];
        let latent0 = lay.latent.expect("joint layout");
        for (i, s) in self.subjects.iter().enumerate() {
            let k = s.k as usize;
            let (s1, rho, sc) = scales[k];
            let ob = lay.beta + 2 * k;
            let og = lay.gamma + 2 * k;
            let ot = lay.theta + 2 * k;
            let mu1 = pos[ob] + pos[og] * s.lx + pos[ot] * s.t;
            let mu2 = pos[ob + 1] + pos[og + 1] * s.lx + pos[ot + 1] * s.t;
            let d = s.y1 - mu1;
            let inv_s1 = 1.0 / s1;
            let z = d * inv_s1;
            let mu_c = mu2 + rho * z;
            let sign = if s.up { 1.0 } else { -1.0 };
            let q = sign * mu_c / sc;

            let v = pos[latent0 + i];
            let av = v.abs();
            // log φ(z)/σ1 + log Φ(q) + log u(1-u)
            lp_k[k] += -s1.ln() - LN_SQRT_2PI - 0.5 * z * z
                + log_std_normal_cdf(q)
                + (-av - 2.0 * (-av).exp().ln_1p());

            if let Some(buf) = g.as_deref_mut() {
                let m = mills_ratio(q);
                let ms = m * sign / sc;
                let g_mu1 = z * inv_s1 - ms * rho * inv_s1;
                let g_mu2 = ms;
                buf[ob] += g_mu1;
                buf[og] += g_mu1 * s.lx;
                buf[ot] += g_mu1 * s.t;
                buf[ob + 1] += g_mu2;
                buf[og + 1] += g_mu2 * s.lx;
                buf[ot + 1] += g_mu2 * s.t;
                d_sigma1[k] += (z * z - 1.0) * inv_s1 - ms * rho * z * inv_s1;
                d_rho[k] += ms * (z + mu_c * rho / (sc * sc));
                buf[latent0 + i] = 1.0 - 2.0 * logistic(v);
            }
        }

        let mut total = 0.0f64;
        if hier {
            for lk in &lp_k {
                total += lk;
            }
            total += self.joint_hier_priors(pos, &mut g, &mut d_sigma1, &mut d_rho, &scales);
        } else {
            for k in 0..kk {
                let mut lk = lp_k[k];
                lk += self.joint_strat_priors_k(pos, &mut g, k, &mut d_sigma1, &mut d_rho, &scales);
                total += lk;
            }
        }

        // Chain scale gradients through the unconstraining transforms.
        if let Some(buf) = g.as_deref_mut() {
            if hier {
                let (s1, rho, _) = scales[0];
                buf[lay.sigma1_coord(0)] = d_sigma1.iter().sum::<f64>() * s1 + 1.0;
                buf[lay.rho_coord(0)] =
                    d_rho.iter().sum::<f64>() * (1.0 - rho * rho) - 2.0 * rho * pri.lkj_eta;
            } else {
                for k in 0..kk {
                    let (s1, rho, _) = scales[k];
                    buf[lay.sigma1_coord(k)] = d_sigma1[k] * s1 + 1.0;
                    buf[lay.rho_coord(k)] =
                        d_rho[k] * (1.0 - rho * rho) - 2.0 * rho * pri.lkj_eta;
                }
            }
        }

        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Hierarchical joint priors. Returns the prior log density; scale-prior
    /// gradients are folded into `d_sigma1`/`d_rho` on the constrained scale.
    fn joint_hier_priors(
        &self,
        pos: &[f64],
        g: &mut Option<&mut [f64]>,
        d_sigma1: &mut [f64],
        d_rho: &mut [f64],
        scales: &[(f64, f64, f64)],
    ) -> f64 {
        let lay = &self.layout;
        let pri = &self.spec.priors;
        let kk = lay.n_subtrials;
        let om = lay.hyper_mean.expect("hierarchical layout");
        let os = lay.hyper_sd.expect("hierarchical layout");
        let floor = lay.sd_floor;
        let mut lp = 0.0;

        // Level 1: regression blocks around their hyper means.
        for (b, base) in [lay.beta, lay.gamma, lay.theta].into_iter().enumerate() {
            for c in 0..2 {
                let mu = pos[om + 2 * b + c];
                let w = pos[os + 2 * b + c];
                let sd = floor + w.exp();
                let inv_var = 1.0 / (sd * sd);
                let mut d_sd = 0.0;
                for k in 0..kk {
                    let x = pos[base + 2 * k + c];
                    let e = x - mu;
                    lp += -sd.ln() - LN_SQRT_2PI - 0.5 * e * e * inv_var;
                    if let Some(buf) = g.as_deref_mut() {
                        buf[base + 2 * k + c] += -e * inv_var;
                        buf[om + 2 * b + c] += e * inv_var;
                        d_sd += -1.0 / sd + e * e * inv_var / sd;
                    }
                }
                // Level 2 on the mean and the (shifted-exponential) sd.
                let m_sd = pri.level2_mean_sd;
                lp += -0.5 * mu * mu / (m_sd * m_sd);
                lp += -pri.level2_rate * (sd - floor) + w;
                if let Some(buf) = g.as_deref_mut() {
                    buf[om + 2 * b + c] += -mu / (m_sd * m_sd);
                    d_sd += -pri.level2_rate;
                    buf[os + 2 * b + c] = d_sd * (sd - floor) + 1.0;
                }
            }
        }

        // Shared scale parameters.
        let (s1, rho, _) = scales[0];
        lp += -(pri.ig_shape + 1.0) * s1.ln() - pri.ig_scale / s1 + pos[lay.sigma1_coord(0)];
        lp += pri.lkj_eta * (1.0 - rho * rho).ln();
        if g.is_some() {
            d_sigma1[0] += -(pri.ig_shape + 1.0) / s1 + pri.ig_scale / (s1 * s1);
            // LKJ (eta-1) plus tanh Jacobian fold to -2·rho·eta in the
            // unconstrained coordinate; handled at the chain-rule site.
            let _ = d_rho;
        }
        lp
    }

    /// Stratified joint priors for subtrial `k`.
    fn joint_strat_priors_k(
        &self,
        pos: &[f64],
        g: &mut Option<&mut [f64]>,
        k: usize,
        d_sigma1: &mut [f64],
        _d_rho: &mut [f64],
        scales: &[(f64, f64, f64)],
    ) -> f64 {
        let lay = &self.layout;
        let pri = &self.spec.priors;
        let mut lp = 0.0;
        for (base, sd) in [
            (lay.beta, pri.beta_gamma_sd),
            (lay.gamma, pri.beta_gamma_sd),
            (lay.theta, pri.theta_sd),
        ] {
            let inv_var = 1.0 / (sd * sd);
            for c in 0..2 {
                let x = pos[base + 2 * k + c];
                lp += -0.5 * x * x * inv_var;
                if let Some(buf) = g.as_deref_mut() {
                    buf[base + 2 * k + c] += -x * inv_var;
                }
            }
        }
        let (s1, rho, _) = scales[k];
        lp += -(pri.ig_shape + 1.0) * s1.ln() - pri.ig_scale / s1 + pos[lay.sigma1_coord(k)];
        lp += pri.lkj_eta * (1.0 - rho * rho).ln();
        if g.is_some() {
            d_sigma1[k] += -(pri.ig_shape + 1.0) / s1 + pri.ig_scale / (s1 * s1);
        }
        lp
    }

    fn binary_logp_grad(&self, pos: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let lay = &self.layout;
        let pri = &self.spec.priors;
        let kk = lay.n_subtrials;
        let hier = self.spec.kind.is_hierarchical();
        let mut g = grad;
        if let Some(buf) = g.as_deref_mut() {
            buf.fill(0.0);
        }

        let mut lp_k = vec![0.0f64; kk];
        for s in &self.subjects {
            let k = s.k as usize;
            let xi = pos[lay.beta + k] + pos[lay.gamma + k] * s.lx + pos[lay.theta + k] * s.t;
            // r·xi - log(1 + e^xi), computed stably.
            lp_k[k] += s.resp * xi - (xi.max(0.0) + (-xi.abs()).exp().ln_1p());
            if let Some(buf) = g.as_deref_mut() {
                let e = s.resp - logistic(xi);
                buf[lay.beta + k] += e;
                buf[lay.gamma + k] += e * s.lx;
                buf[lay.theta + k] += e * s.t;
            }
        }

        let mut total = 0.0f64;
        if hier {
            for lk in &lp_k {
                total += lk;
            }
            let om = lay.hyper_mean.expect("hierarchical layout");
            let os = lay.hyper_sd.expect("hierarchical layout");
            let floor = lay.sd_floor;
            for (b, base) in [lay.beta, lay.gamma, lay.theta].into_iter().enumerate() {
                let mu = pos[om + b];
                let w = pos[os + b];
                let sd = floor + w.exp();
                let inv_var = 1.0 / (sd * sd);
                let mut d_sd = 0.0;
                for k in 0..kk {
                    let e = pos[base + k] - mu;
                    total += -sd.ln() - LN_SQRT_2PI - 0.5 * e * e * inv_var;
                    if let Some(buf) = g.as_deref_mut() {
                        buf[base + k] += -e * inv_var;
                        buf[om + b] += e * inv_var;
                        d_sd += -1.0 / sd + e * e * inv_var / sd;
                    }
                }
                let m_sd = pri.level2_mean_sd;
                total += -0.5 * mu * mu / (m_sd * m_sd);
                total += -pri.level2_rate * (sd - floor) + w;
                if let Some(buf) = g.as_deref_mut() {
                    buf[om + b] += -mu / (m_sd * m_sd);
                    d_sd += -pri.level2_rate;
                    buf[os + b] = d_sd * (sd - floor) + 1.0;
                }
            }
        } else {
            let inv_var = 1.0 / (pri.beta_gamma_sd * pri.beta_gamma_sd);
            for k in 0..kk {
                let mut lk = lp_k[k];
                for base in [lay.beta, lay.gamma, lay.theta] {
                    let x = pos[base + k];
                    lk += -0.5 * x * x * inv_var;
                    if let Some(buf) = g.as_deref_mut() {
                        buf[base + k] += -x * inv_var;
                    }
                }
                total += lk;
            }
        }

        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Reconstruct the latent outcome for subject `i` at parameter point
    /// `pos`, through the inverse CDF of its truncated conditional normal.
    pub fn reconstruct_latent(&self, pos: &[f64], i: usize) -> Result<f64> {
        let lay = &self.layout;
        if !self.spec.kind.is_joint() {
            return Err(Error::Domain("binary models carry no latent block".into()));
        }
        let s = &self.subjects[i];
        let k = s.k as usize;
        let s1 = pos[lay.sigma1_coord(k)].exp();
        let rho = pos[lay.rho_coord(k)].tanh();
        let sc = (1.0 - rho * rho).sqrt();
        let ob = lay.beta + 2 * k;
        let og = lay.gamma + 2 * k;
        let ot = lay.theta + 2 * k;
        let mu1 = pos[ob] + pos[og] * s.lx + pos[ot] * s.t;
        let mu2 = pos[ob + 1] + pos[og + 1] * s.lx + pos[ot + 1] * s.t;
        let mu_c = mu2 + rho * (s.y1 - mu1) / s1;
        let u = logistic(pos[lay.latent.expect("joint layout") + i]);
        let (lo, hi) = if s.up {
            ((0.0 - mu_c) / sc, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, (0.0 - mu_c) / sc)
        };
        Ok(mu_c + sc * truncated_std_normal_inv_cdf(u, lo, hi)?)
    }
}

/// Linear predictor(s) of one subject under a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictor {
    /// Joint models: means of the continuous and latent outcomes.
    Bivariate { mu1: f64, mu2: f64 },
    /// Binary models: the logit-scale predictor.
    Scalar { xi: f64 },
}

/// Mean equations of the subject's subtrial evaluated at `params`.
pub fn linear_predictors(params: &ParameterVector, subject: &SubjectRecord) -> Predictor {
    let lay = params.layout();
    assert!(
        subject.subtrial >= 1 && subject.subtrial <= lay.n_subtrials,
        "subject's subtrial {} outside model range",
        subject.subtrial
    );
    let pos = params.values();
    let k = subject.subtrial - 1;
    let lx = subject.baseline.ln();
    let t = f64::from(subject.treatment);
    if lay.block == 2 {
        let mu1 = pos[lay.coef(0, k, 0)] + pos[lay.coef(1, k, 0)] * lx + pos[lay.coef(2, k, 0)] * t;
        let mu2 = pos[lay.coef(0, k, 1)] + pos[lay.coef(1, k, 1)] * lx + pos[lay.coef(2, k, 1)] * t;
        Predictor::Bivariate { mu1, mu2 }
    } else {
        let xi = pos[lay.coef(0, k, 0)] + pos[lay.coef(1, k, 0)] * lx + pos[lay.coef(2, k, 0)] * t;
        Predictor::Scalar { xi }
    }
}

/// Log posterior of a joint (latent-augmented) model.
pub fn abba_log_posterior(spec: &ModelSpec, data: &Dataset, params: &ParameterVector) -> Result<f64> {
    if !spec.kind.is_joint() {
        return Err(Error::Validation(
            "abba_log_posterior requires a joint model kind".into(),
        ));
    }
    let dens = PosteriorDensity::new(spec, data)?;
    check_dims(&dens, params)?;
    Ok(dens.logp_grad(params.values(), None))
}

/// Log posterior of a binary-outcome model.
pub fn bin_log_posterior(spec: &ModelSpec, data: &Dataset, params: &ParameterVector) -> Result<f64> {
    if spec.kind.is_joint() {
        return Err(Error::Validation(
            "bin_log_posterior requires a binary model kind".into(),
        ));
    }
    let dens = PosteriorDensity::new(spec, data)?;
    check_dims(&dens, params)?;
    Ok(dens.logp_grad(params.values(), None))
}

/// Gradient of the corresponding log posterior in unconstrained coordinates.
pub fn gradient(spec: &ModelSpec, data: &Dataset, params: &ParameterVector) -> Result<ParameterVector> {
    let dens = PosteriorDensity::new(spec, data)?;
    check_dims(&dens, params)?;
    let mut g = vec![0.0; dens.dim()];
    let lp = dens.logp_grad(params.values(), Some(&mut g));
    if !lp.is_finite() {
        return Err(Error::Domain(
            "log posterior is not finite at the requested point".into(),
        ));
    }
    ParameterVector::new(dens.layout().clone(), g)
}

fn check_dims(dens: &PosteriorDensity, params: &ParameterVector) -> Result<()> {
    if params.values().len() != dens.dim() {
        return Err(Error::Validation(format!(
            "parameter vector has {} coordinates but the model needs {}",
            params.values().len(),
            dens.dim()
        )));
    }
    Ok(())
}
