//! Unconstrained parameter-space layout and transforms.
//!
//! Every model samples in an unconstrained space: SDs are stored as
//! `log(x - floor)`, the correlation as `atanh(rho)`, and latent components
//! as `logit(u)`. The [`Layout`] maps named model parameters to coordinate
//! offsets so density, gradient, and reporting code agree on one indexing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::types::{ModelKind, ModelSpec};

/// Coordinate-wise map between unconstrained and constrained scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    /// x = floor + exp(w)
    LowerBounded { floor: f64 },
    /// x = tanh(w)
    Tanh,
    /// x = logistic(w)
    Logit,
}

impl Transform {
    #[inline]
    pub fn constrain(self, w: f64) -> f64 {
        match self {
            Transform::Identity => w,
            Transform::LowerBounded { floor } => floor + w.exp(),
            Transform::Tanh => w.tanh(),
            Transform::Logit => logistic(w),
        }
    }

    #[inline]
    pub fn unconstrain(self, x: f64) -> Result<f64> {
        match self {
            Transform::Identity => Ok(x),
            Transform::LowerBounded { floor } => {
                if x <= floor {
                    return Err(Error::Domain(format!(
                        "value {x} at or below lower bound {floor}"
                    )));
                }
                Ok((x - floor).ln())
            }
            Transform::Tanh => {
                if x.abs() >= 1.0 {
                    return Err(Error::Domain(format!("correlation {x} outside (-1,1)")));
                }
                Ok(x.atanh())
            }
            Transform::Logit => {
                if !(x > 0.0 && x < 1.0) {
                    return Err(Error::Domain(format!("latent component {x} outside (0,1)")));
                }
                Ok((x / (1.0 - x)).ln())
            }
        }
    }
}

#[inline]
pub fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Offsets of the parameter blocks inside the unconstrained vector.
///
/// Regression blocks are laid out subtrial-major: for joint models the
/// per-subtrial block is the pair (continuous, latent); for binary models it
/// is a scalar. Hierarchical kinds carry hyper means and SDs; stratified
/// joint kinds carry one (sigma1, rho) pair per subtrial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: ModelKind,
    pub n_subtrials: usize,
    /// Latent component count (subjects) for joint kinds, 0 for binary.
    pub n_latent: usize,
    /// 2 for joint models, 1 for binary models.
    pub block: usize,
    pub beta: usize,
    pub gamma: usize,
    pub theta: usize,
    pub hyper_mean: Option<usize>,
    pub hyper_sd: Option<usize>,
    pub log_sigma1: Option<usize>,
    pub atanh_rho: Option<usize>,
    pub latent: Option<usize>,
    pub dim: usize,
    /// Floor applied to hierarchy SDs (model-kind dependent).
    pub sd_floor: f64,
}

impl Layout {
    pub fn for_spec(spec: &ModelSpec, n_subjects: usize) -> Result<Layout> {
        spec.validate()?;
        let k = spec.n_subtrials;
        let joint = spec.kind.is_joint();
        let hier = spec.kind.is_hierarchical();
        let block = if joint { 2 } else { 1 };
        if joint && n_subjects == 0 {
            return Err(Error::Validation(
                "joint models require at least one subject for the latent block".into(),
            ));
        }

        let mut off = 0usize;
        let beta = off;
        off += k * block;
        let gamma = off;
        off += k * block;
        let theta = off;
        off += k * block;
        let hyper_mean = hier.then(|| {
            let o = off;
            off += 3 * block;
            o
        });
        let hyper_sd = hier.then(|| {
            let o = off;
            off += 3 * block;
            o
        });
        let log_sigma1 = joint.then(|| {
            let o = off;
            off += if hier { 1 } else { k };
            o
        });
        let atanh_rho = joint.then(|| {
            let o = off;
            off += if hier { 1 } else { k };
            o
        });
        let latent = joint.then(|| {
            let o = off;
            off += n_subjects;
            o
        });

        Ok(Layout {
            kind: spec.kind,
            n_subtrials: k,
            n_latent: if joint { n_subjects } else { 0 },
            block,
            beta,
            gamma,
            theta,
            hyper_mean,
            hyper_sd,
            log_sigma1,
            atanh_rho,
            latent,
            dim: off,
            sd_floor: if joint {
                spec.priors.level2_lower_abba
            } else {
                spec.priors.level2_lower_bin
            },
        })
    }

    /// Offset of regression coefficient `which` (0=beta, 1=gamma, 2=theta)
    /// for subtrial `k` (0-based), component `c`.
    #[inline]
    pub fn coef(&self, which: usize, k: usize, c: usize) -> usize {
        debug_assert!(c < self.block && k < self.n_subtrials);
        let base = match which {
            0 => self.beta,
            1 => self.gamma,
            _ => self.theta,
        };
        base + k * self.block + c
    }

    /// Offset of the `sigma1` coordinate for subtrial `k` (shared coordinate
    /// for hierarchical kinds).
    #[inline]
    pub fn sigma1_coord(&self, k: usize) -> usize {
        let base = self.log_sigma1.expect("joint model");
        if self.kind.is_hierarchical() {
            base
        } else {
            base + k
        }
    }

    #[inline]
    pub fn rho_coord(&self, k: usize) -> usize {
        let base = self.atanh_rho.expect("joint model");
        if self.kind.is_hierarchical() {
            base
        } else {
            base + k
        }
    }

    /// Transform tag for each coordinate, aligned with the layout order.
    pub fn transforms(&self) -> Vec<Transform> {
        let mut ts = vec![Transform::Identity; self.dim];
        if let Some(o) = self.hyper_sd {
            for t in ts.iter_mut().skip(o).take(3 * self.block) {
                *t = Transform::LowerBounded { floor: self.sd_floor };
            }
        }
        if let Some(o) = self.log_sigma1 {
            let count = if self.kind.is_hierarchical() { 1 } else { self.n_subtrials };
            for t in ts.iter_mut().skip(o).take(count) {
                *t = Transform::LowerBounded { floor: 0.0 };
            }
        }
        if let Some(o) = self.atanh_rho {
            let count = if self.kind.is_hierarchical() { 1 } else { self.n_subtrials };
            for t in ts.iter_mut().skip(o).take(count) {
                *t = Transform::Tanh;
            }
        }
        if let Some(o) = self.latent {
            for t in ts.iter_mut().skip(o).take(self.n_latent) {
                *t = Transform::Logit;
            }
        }
        ts
    }

    /// Human-readable coordinate names, aligned with the layout order.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim);
        let block_names: &[&str] = if self.block == 2 { &["1", "2"] } else { &[""] };
        for (base, label) in [(self.beta, "beta"), (self.gamma, "gamma"), (self.theta, "theta")] {
            debug_assert_eq!(names.len(), base);
            for k in 0..self.n_subtrials {
                for c in block_names {
                    if c.is_empty() {
                        names.push(format!("{label}.{}", k + 1));
                    } else {
                        names.push(format!("{label}.{}.{c}", k + 1));
                    }
                }
            }
        }
        if self.hyper_mean.is_some() {
            for label in ["mu_beta", "mu_gamma", "mu_theta"] {
                for c in block_names {
                    if c.is_empty() {
                        names.push(label.to_string());
                    } else {
                        names.push(format!("{label}.{c}"));
                    }
                }
            }
            for label in ["sigma_beta", "sigma_gamma", "sigma_theta"] {
                for c in block_names {
                    if c.is_empty() {
                        names.push(label.to_string());
                    } else {
                        names.push(format!("{label}.{c}"));
                    }
                }
            }
        }
        if self.log_sigma1.is_some() {
            if self.kind.is_hierarchical() {
                names.push("sigma1".into());
            } else {
                for k in 0..self.n_subtrials {
                    names.push(format!("sigma1.{}", k + 1));
                }
            }
        }
        if self.atanh_rho.is_some() {
            if self.kind.is_hierarchical() {
                names.push("rho".into());
            } else {
                for k in 0..self.n_subtrials {
                    names.push(format!("rho.{}", k + 1));
                }
            }
        }
        if self.latent.is_some() {
            for i in 0..self.n_latent {
                names.push(format!("u.{}", i + 1));
            }
        }
        debug_assert_eq!(names.len(), self.dim);
        names
    }

    /// Map a full unconstrained vector to the constrained scale.
    pub fn constrain(&self, unconstrained: &[f64]) -> Vec<f64> {
        debug_assert_eq!(unconstrained.len(), self.dim);
        self.transforms()
            .iter()
            .zip(unconstrained)
            .map(|(t, &w)| t.constrain(w))
            .collect()
    }
}

/// One point in the unconstrained sampling space of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    layout: Layout,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim {
            return Err(Error::Validation(format!(
                "parameter vector has {} coordinates but the model needs {}",
                values.len(),
                layout.dim
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.dim];
        Self { layout, values }
    }

    #[inline]
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn constrained(&self) -> Vec<f64> {
        self.layout.constrain(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::types::ModelSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimensions_by_kind() {
        let k = 3;
        let n = 150;
        let dim = |kind| {
            Layout::for_spec(&ModelSpec::new(kind, k), n).unwrap().dim
        };
        // joint hierarchical: 3*2K regression + 6 means + 6 sds + sigma1 + rho + N
        assert_eq!(dim(ModelKind::AbbaHierarchical), 18 + 12 + 1 + 1 + 150);
        // joint stratified: 3*2K regression + K sigma1 + K rho + N
        assert_eq!(dim(ModelKind::AbbaStratified), 18 + 3 + 3 + 150);
        // binary hierarchical: 3K regression + 3 means + 3 sds
        assert_eq!(dim(ModelKind::BinHierarchical), 9 + 6);
        assert_eq!(dim(ModelKind::BinStratified), 9);
    }

    #[test]
    fn names_align_with_dim() {
        for kind in [
            ModelKind::AbbaHierarchical,
            ModelKind::AbbaStratified,
            ModelKind::BinHierarchical,
            ModelKind::BinStratified,
        ] {
            let lay = Layout::for_spec(&ModelSpec::new(kind, 2), 7).unwrap();
            let names = lay.names();
            assert_eq!(names.len(), lay.dim);
            assert_eq!(lay.transforms().len(), lay.dim);
            let unique: std::collections::HashSet<_> = names.iter().collect();
            assert_eq!(unique.len(), names.len(), "duplicate names for {kind:?}");
        }
    }

    #[test]
    fn transforms_round_trip() {
        let cases = [
            (Transform::Identity, 1.3),
            (Transform::LowerBounded { floor: 0.1 }, 0.7),
            (Transform::LowerBounded { floor: 0.0 }, 2.5),
            (Transform::Tanh, -0.62),
            (Transform::Logit, 0.42),
        ];
        for (t, x) in cases {
            let w = t.unconstrain(x).unwrap();
            assert_abs_diff_eq!(t.constrain(w), x, epsilon = 1e-12);
        }
        for (t, w) in [
            (Transform::LowerBounded { floor: 0.1 }, -1.8),
            (Transform::Tanh, 2.0),
            (Transform::Logit, -3.0),
        ] {
            let x = t.constrain(w);
            assert_abs_diff_eq!(t.unconstrain(x).unwrap(), w, epsilon = 1e-12);
        }
    }

    #[test]
    fn sd_floor_is_respected_after_back_transform() {
        let lay = Layout::for_spec(&ModelSpec::new(ModelKind::AbbaHierarchical, 3), 10).unwrap();
        let o = lay.hyper_sd.unwrap();
        let mut v = vec![0.0; lay.dim];
        v[o] = -40.0; // extremely negative unconstrained sd coordinate
        let c = lay.constrain(&v);
        assert!(c[o] >= 0.1);
        assert!(c[o] - 0.1 < 1e-15);
    }

    #[test]
    fn vector_rejects_wrong_dimension() {
        let lay = Layout::for_spec(&ModelSpec::new(ModelKind::BinStratified, 2), 5).unwrap();
        assert!(ParameterVector::new(lay.clone(), vec![0.0; lay.dim + 1]).is_err());
        assert!(ParameterVector::new(lay.clone(), vec![0.0; lay.dim]).is_ok());
    }
}
