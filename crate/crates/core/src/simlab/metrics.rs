//! Operating-characteristic metrics over simulation replicates.

use serde::{Deserialize, Serialize};

use crate::models::ModelKind;

/// One replicate's decision summary for one (model, subtrial) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateCell {
    pub lor_mean: f64,
    pub lor_var: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

/// Aggregated operating characteristics for one (model, subtrial) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: ModelKind,
    pub subtrial: usize,
    pub true_lor: f64,
    /// Replicates that actually contributed (requested M minus failures).
    pub effective_m: usize,
    pub bias: f64,
    pub bias_mcse: Option<f64>,
    /// Mean reciprocal posterior variance of the log odds ratio.
    pub precision: f64,
    /// Share of replicates whose lower interval limit exceeded zero;
    /// reported as type-I error when the true log odds ratio is zero.
    pub rejection_rate: f64,
    pub rejection_mcse: Option<f64>,
    pub is_null: bool,
    pub mean_width: f64,
    pub width_mcse: Option<f64>,
    pub coverage: f64,
    pub coverage_mcse: Option<f64>,
    pub flagged_fits: usize,
    pub clamped_draws: usize,
    pub failures: usize,
}

impl MetricsRow {
    pub fn rejection_label(&self) -> &'static str {
        if self.is_null {
            "type_one_error"
        } else {
            "power"
        }
    }
}

/// Full report for one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub requested_m: usize,
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn row(&self, model: ModelKind, subtrial: usize) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.subtrial == subtrial)
    }
}

/// The five operating characteristics over one cell's replicates.
///
/// Bias averages the distance of posterior means from the reference value;
/// precision averages reciprocal posterior variances; the rejection rate
/// counts lower interval limits above zero; width averages interval widths;
/// coverage counts intervals containing the reference value. Monte Carlo
/// standard errors use the sample SD for means and the binomial formula for
/// proportions, and are absent when only one replicate contributed.
pub fn compute_metrics(
    model: ModelKind,
    subtrial: usize,
    cells: &[ReplicateCell],
    true_lor: f64,
    flagged_fits: usize,
    clamped_draws: usize,
    failures: usize,
) -> MetricsRow {
    let m = cells.len();
    let mf = m as f64;
    let mean_of = |f: &dyn Fn(&ReplicateCell) -> f64| cells.iter().map(|c| f(c)).sum::<f64>() / mf;
    let sd_of = |f: &dyn Fn(&ReplicateCell) -> f64, mean: f64| {
        if m < 2 {
            return f64::NAN;
        }
        (cells.iter().map(|c| (f(c) - mean).powi(2)).sum::<f64>() / (mf - 1.0)).sqrt()
    };

    let mean_lor = mean_of(&|c| c.lor_mean);
    let bias = mean_lor - true_lor;
    let precision = mean_of(&|c| 1.0 / c.lor_var);
    let rejection_rate = mean_of(&|c| f64::from(c.hdi_low > 0.0));
    let mean_width = mean_of(&|c| c.hdi_high - c.hdi_low);
    let coverage = mean_of(&|c| f64::from(c.hdi_low <= true_lor && true_lor <= c.hdi_high));

    let mcse = |sd: f64| if m >= 2 && sd.is_finite() { Some(sd / mf.sqrt()) } else { None };
    let binom_mcse = |p: f64| {
        if m >= 2 {
            Some((p * (1.0 - p) / mf).sqrt())
        } else {
            None
        }
    };

    MetricsRow {
        model,
        subtrial,
        true_lor,
        effective_m: m,
        bias,
        bias_mcse: mcse(sd_of(&|c| c.lor_mean, mean_lor)),
        precision,
        rejection_rate,
        rejection_mcse: binom_mcse(rejection_rate),
        is_null: true_lor == 0.0,
        mean_width,
        width_mcse: mcse(sd_of(&|c| c.hdi_high - c.hdi_low, mean_width)),
        coverage,
        coverage_mcse: binom_mcse(coverage),
        flagged_fits,
        clamped_draws,
        failures,
    }
}
