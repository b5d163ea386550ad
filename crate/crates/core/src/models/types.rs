//! Domain types shared by the four outcome models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trial participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    /// Subtrial index, 1-based and contiguous.
    pub subtrial: usize,
    /// 1 for treatment, 0 for control.
    pub treatment: u8,
    /// Baseline disease-activity measure; enters the model as log(baseline).
    pub baseline: f64,
    /// Continuous outcome on the log-score scale.
    pub y_continuous: f64,
    /// 1 if the failure event (rescue medication etc.) occurred.
    pub y_binary: u8,
}

/// Direction of the continuous response criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Above,
    Below,
}

/// How a responder is derived from the two outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponderRule {
    /// Threshold on the continuous outcome (log-score units).
    pub threshold: f64,
    pub direction: Direction,
    /// Whether response additionally requires the failure indicator to be 0.
    pub success_requires_no_failure: bool,
}

impl Default for ResponderRule {
    fn default() -> Self {
        Self {
            threshold: 20.0f64.ln(),
            direction: Direction::Above,
            success_requires_no_failure: true,
        }
    }
}

impl ResponderRule {
    pub fn is_responder(&self, y_continuous: f64, y_binary: u8) -> bool {
        let hit = match self.direction {
            Direction::Above => y_continuous >= self.threshold,
            Direction::Below => y_continuous < self.threshold,
        };
        hit && (!self.success_requires_no_failure || y_binary == 0)
    }
}

/// Per-subject indicator that the latent variable is constrained positive.
///
/// Positive latent value means "no failure event": subjects with
/// `y_binary = 0` get indicator 1, so a positive latent sign consistently
/// encodes success on the binary component in both the likelihood and the
/// success-probability integral.
pub fn latent_sign_indicators(data: &Dataset, _rule: &ResponderRule) -> Vec<u8> {
    data.records()
        .iter()
        .map(|r| u8::from(r.y_binary == 0))
        .collect()
}

/// Prior hyperparameters for all four models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// SD of the normal priors on intercepts and baseline effects.
    pub beta_gamma_sd: f64,
    /// SD of the normal priors on treatment effects in the stratified
    /// joint model.
    pub theta_sd: f64,
    /// SD of the normal priors on hierarchy means.
    pub level2_mean_sd: f64,
    /// Rate of the exponential priors on hierarchy SDs.
    pub level2_rate: f64,
    /// Truncation floor for hierarchy SDs in the joint models.
    pub level2_lower_abba: f64,
    /// Truncation floor for hierarchy SDs in the binary models.
    pub level2_lower_bin: f64,
    /// LKJ shape for the outcome correlation.
    pub lkj_eta: f64,
    /// Inverse-gamma shape for the continuous-outcome SD.
    pub ig_shape: f64,
    /// Inverse-gamma scale for the continuous-outcome SD.
    pub ig_scale: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta_gamma_sd: 5.0,
            theta_sd: 10.0,
            level2_mean_sd: 5.0,
            level2_rate: 2.0,
            level2_lower_abba: 0.1,
            level2_lower_bin: 0.3,
            lkj_eta: 5.0,
            ig_shape: 0.5,
            ig_scale: 0.005,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("beta_gamma_sd", self.beta_gamma_sd),
            ("theta_sd", self.theta_sd),
            ("level2_mean_sd", self.level2_mean_sd),
            ("level2_rate", self.level2_rate),
            ("lkj_eta", self.lkj_eta),
            ("ig_shape", self.ig_shape),
            ("ig_scale", self.ig_scale),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("level2_lower_abba", self.level2_lower_abba),
            ("level2_lower_bin", self.level2_lower_bin),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Which of the four models to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    AbbaHierarchical,
    AbbaStratified,
    BinHierarchical,
    BinStratified,
}

impl ModelKind {
    pub fn is_joint(self) -> bool {
        matches!(self, ModelKind::AbbaHierarchical | ModelKind::AbbaStratified)
    }

    pub fn is_hierarchical(self) -> bool {
        matches!(self, ModelKind::AbbaHierarchical | ModelKind::BinHierarchical)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::AbbaHierarchical => "abba",
            ModelKind::AbbaStratified => "abba-strat",
            ModelKind::BinHierarchical => "bin",
            ModelKind::BinStratified => "bin-strat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "abba" | "abba-hier" => Ok(ModelKind::AbbaHierarchical),
            "abba-strat" | "abba-stratified" => Ok(ModelKind::AbbaStratified),
            "bin" | "bin-hier" => Ok(ModelKind::BinHierarchical),
            "bin-strat" | "bin-stratified" => Ok(ModelKind::BinStratified),
            other => Err(Error::Validation(format!(
                "unknown model kind '{other}' (expected abba, abba-strat, bin, bin-strat)"
            ))),
        }
    }
}

/// Full model specification: kind, subtrial count, priors and responder rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_subtrials: usize,
    pub priors: PriorConfig,
    pub rule: ResponderRule,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n_subtrials: usize) -> Self {
        Self {
            kind,
            n_subtrials,
            priors: PriorConfig::default(),
            rule: ResponderRule::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subtrials == 0 {
            return Err(Error::Validation("model requires at least one subtrial".into()));
        }
        if !self.rule.threshold.is_finite() {
            return Err(Error::Validation("responder threshold must be finite".into()));
        }
        self.priors.validate()
    }
}

/// Validated, canonically ordered collection of subject records.
///
/// Records are sorted by (subtrial, treatment, baseline, outcomes) at
/// construction so that every downstream computation is invariant to the
/// order records arrived in, bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<SubjectRecord>,
    n_subtrials: usize,
}

impl Dataset {
    pub fn new(mut records: Vec<SubjectRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Validation("dataset contains no records".into()));
        }
        let mut max_k = 0usize;
        for (i, r) in records.iter().enumerate() {
            if r.subtrial == 0 {
                return Err(Error::Validation(format!(
                    "record {i}: subtrial indices are 1-based"
                )));
            }
            if !(r.baseline > 0.0 && r.baseline.is_finite()) {
                return Err(Error::Validation(format!(
                    "record {i}: baseline must be positive, got {}",
                    r.baseline
                )));
            }
            if !r.y_continuous.is_finite() {
                return Err(Error::Validation(format!(
                    "record {i}: continuous outcome must be finite"
                )));
            }
            if r.treatment > 1 {
                return Err(Error::Validation(format!(
                    "record {i}: treatment must be 0 or 1, got {}",
                    r.treatment
                )));
            }
            if r.y_binary > 1 {
                return Err(Error::Validation(format!(
                    "record {i}: binary outcome must be 0 or 1, got {}",
                    r.y_binary
                )));
            }
            max_k = max_k.max(r.subtrial);
        }
        let mut seen = vec![false; max_k];
        for r in &records {
            seen[r.subtrial - 1] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Validation(format!(
                "subtrial {} has no records; subtrial indices must be contiguous",
                k + 1
            )));
        }
        records.sort_unstable_by(|a, b| {
            (a.subtrial, a.treatment)
                .cmp(&(b.subtrial, b.treatment))
                .then(a.baseline.total_cmp(&b.baseline))
                .then(a.y_continuous.total_cmp(&b.y_continuous))
                .then(a.y_binary.cmp(&b.y_binary))
        });
        Ok(Self {
            records,
            n_subtrials: max_k,
        })
    }

    #[inline]
    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    #[inline]
    pub fn n_subtrials(&self) -> usize {
        self.n_subtrials
    }

    /// Records belonging to one subtrial (1-based), as a new dataset with
    /// that subtrial relabeled to 1.
    pub fn single_subtrial(&self, k: usize) -> Result<Dataset> {
        let recs: Vec<SubjectRecord> = self
            .records
            .iter()
            .filter(|r| r.subtrial == k)
            .map(|r| SubjectRecord { subtrial: 1, ..*r })
            .collect();
        if recs.is_empty() {
            return Err(Error::Validation(format!("subtrial {k} has no records")));
        }
        Dataset::new(recs)
    }
}
