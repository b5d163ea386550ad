//! CSV report writers shared by the subcommands.

use std::path::Path;

use augbin_core::posterior::SubtrialSummary;
use augbin_core::sampler::Diagnostics;
use augbin_core::simlab::{MetricsReport, ReplicateRow};

use crate::errors::CliResult;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn write_summaries(path: &Path, summaries: &[SubtrialSummary]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "subtrial",
        "lor_mean",
        "hdi_low",
        "hdi_high",
        "success",
        "lor_var",
        "multimodality_warning",
    ])?;
    for s in summaries {
        w.write_record(&[
            s.subtrial.to_string(),
            fmt(s.lor_mean),
            fmt(s.lor_hdi.low),
            fmt(s.lor_hdi.high),
            s.success.to_string(),
            fmt(s.lor_var),
            s.multimodality_warning.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics(path: &Path, diag: &Diagnostics) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "split_rhat", "ess_bulk", "count"])?;
    for i in 0..diag.names.len() {
        w.write_record(&[
            diag.names[i].clone(),
            fmt(diag.split_rhat[i]),
            fmt(diag.ess_bulk[i]),
            String::new(),
        ])?;
    }
    w.write_record(&[
        "_divergences".to_string(),
        String::new(),
        String::new(),
        diag.divergences.to_string(),
    ])?;
    w.write_record(&[
        "_max_depth_hits".to_string(),
        String::new(),
        String::new(),
        diag.max_depth_hits.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_replicates(path: &Path, rows: &[ReplicateRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "replicate",
        "subtrial",
        "model",
        "lor_mean",
        "hdi_low",
        "hdi_high",
        "success",
        "rhat_max",
        "divergences",
    ])?;
    for r in rows {
        w.write_record(&[
            r.replicate.to_string(),
            r.subtrial.to_string(),
            r.model.label().to_string(),
            fmt(r.lor_mean),
            fmt(r.hdi_low),
            fmt(r.hdi_high),
            r.success.to_string(),
            fmt(r.rhat_max),
            r.divergences.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate(path: &Path, report: &MetricsReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario",
        "model",
        "subtrial",
        "true_lor",
        "effective_m",
        "bias",
        "bias_mcse",
        "precision",
        "measure",
        "rejection_rate",
        "rejection_mcse",
        "mean_hdi_width",
        "width_mcse",
        "coverage",
        "coverage_mcse",
        "flagged_fits",
        "clamped_draws",
        "failures",
    ])?;
    for r in &report.rows {
        w.write_record(&[
            report.scenario.clone(),
            r.model.label().to_string(),
            r.subtrial.to_string(),
            fmt(r.true_lor),
            r.effective_m.to_string(),
            fmt(r.bias),
            fmt_opt(r.bias_mcse),
            fmt(r.precision),
            r.rejection_label().to_string(),
            fmt(r.rejection_rate),
            fmt_opt(r.rejection_mcse),
            fmt(r.mean_width),
            fmt_opt(r.width_mcse),
            fmt(r.coverage),
            fmt_opt(r.coverage_mcse),
            r.flagged_fits.to_string(),
            r.clamped_draws.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
