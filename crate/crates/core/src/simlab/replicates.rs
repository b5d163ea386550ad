//! Replicate execution: generate once, fit every model, accumulate metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::calibrate_intercepts;
use super::generate::generate_dataset;
use super::metrics::{compute_metrics, MetricsReport, ReplicateCell};
use super::scenarios::{BaselineModel, ScenarioSpec};
use crate::error::{Error, Result};
use crate::fit::fit_model;
use crate::models::{ModelKind, ModelSpec};
use crate::numkit::rng::{chain_lane, stream, StreamPurpose};
use crate::posterior::summarize_fit;
use crate::sampler::SamplerConfig;

/// Fits whose λ chains disagree beyond this split-R̂ are flagged.
const RHAT_FLAG: f64 = 1.05;
/// Fits with more than this share of divergent draws are flagged.
const DIVERGENCE_FLAG: f64 = 0.01;
/// Run-level failure budget.
const FAILURE_BUDGET: f64 = 0.05;

/// One (replicate, model, subtrial) outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub model: ModelKind,
    pub subtrial: usize,
    pub lor_mean: f64,
    pub lor_var: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
    pub success: bool,
    /// Largest λ split-R̂ across the fit's subtrials.
    pub rhat_max: f64,
    /// Divergent draws in the fit.
    pub divergences: usize,
    pub flagged: bool,
    pub clamped_draws: usize,
}

/// Everything a simulation run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ReplicateRow>,
    pub report: MetricsReport,
    pub calibrated_beta: Vec<[f64; 2]>,
    pub failures: usize,
}

/// Options for [`run_replicates`].
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub models: Vec<ModelKind>,
    pub replicates: usize,
    pub sampler: SamplerConfig,
    pub master_seed: u64,
    pub workers: usize,
    pub baseline: BaselineModel,
}

/// Run `replicates` simulated trials of one scenario.
///
/// Each replicate generates one dataset and fits every requested model on
/// it. All randomness derives from `(master_seed, replicate, model, chain)`
/// streams, so the output is bit-identical for any worker count.
pub fn run_replicates(scenario: &ScenarioSpec, config: &RunConfig) -> Result<RunOutput> {
    if config.replicates == 0 {
        return Err(Error::Validation("at least one replicate is required".into()));
    }
    if config.models.is_empty() {
        return Err(Error::Validation("at least one model is required".into()));
    }
    scenario.validate()?;

    let beta = match scenario.calibrated_beta() {
        Some(b) => b,
        None => {
            let mut rng = stream(config.master_seed, StreamPurpose::Calibration, 0, 0);
            calibrate_intercepts(scenario, &config.baseline, &mut rng)?
        }
    };

    let kk = scenario.n_subtrials();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;

    // One unit of work per replicate; outputs land in replicate order.
    let per_replicate: Vec<(Vec<ReplicateRow>, usize)> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|rep| run_one_replicate(scenario, config, &beta, rep, kk))
            .collect()
    });

    let mut rows = Vec::with_capacity(config.replicates * config.models.len() * kk);
    let mut failures = 0usize;
    for (mut r, f) in per_replicate {
        rows.append(&mut r);
        failures += f;
    }

    let total_fits = config.replicates * config.models.len();
    if (failures as f64) > FAILURE_BUDGET * total_fits as f64 {
        return Err(Error::ReplicateFailures {
            failed: failures,
            total: total_fits,
        });
    }

    let mut report_rows = Vec::with_capacity(config.models.len() * kk);
    for &model in &config.models {
        for k in 1..=kk {
            let cells: Vec<ReplicateCell> = rows
                .iter()
                .filter(|r| r.model == model && r.subtrial == k)
                .map(|r| ReplicateCell {
                    lor_mean: r.lor_mean,
                    lor_var: r.lor_var,
                    hdi_low: r.hdi_low,
                    hdi_high: r.hdi_high,
                })
                .collect();
            let flagged = rows
                .iter()
                .filter(|r| r.model == model && r.subtrial == k && r.flagged)
                .count();
            let clamped = rows
                .iter()
                .filter(|r| r.model == model && r.subtrial == k)
                .map(|r| r.clamped_draws)
                .sum();
            let model_failures = config.replicates
                - rows
                    .iter()
                    .filter(|r| r.model == model && r.subtrial == k)
                    .count();
            if cells.is_empty() {
                return Err(Error::ReplicateFailures {
                    failed: config.replicates,
                    total: config.replicates,
                });
            }
            report_rows.push(compute_metrics(
                model,
                k,
                &cells,
                scenario.subtrials[k - 1].true_lor,
                flagged,
                clamped,
                model_failures,
            ));
        }
    }

    Ok(RunOutput {
        rows,
        report: MetricsReport {
            scenario: scenario.name.clone(),
            requested_m: config.replicates,
            rows: report_rows,
        },
        calibrated_beta: beta,
        failures,
    })
}

fn run_one_replicate(
    scenario: &ScenarioSpec,
    config: &RunConfig,
    beta: &[[f64; 2]],
    rep: usize,
    kk: usize,
) -> (Vec<ReplicateRow>, usize) {
    let mut rows = Vec::with_capacity(config.models.len() * kk);
    let mut failures = 0usize;

    let mut gen_rng = stream(config.master_seed, StreamPurpose::DataGen, rep as u64, 0);
    let data = match generate_dataset(scenario, beta, &config.baseline, &mut gen_rng) {
        Ok(d) => d,
        Err(_) => return (rows, config.models.len()),
    };

    for (slot, &model) in config.models.iter().enumerate() {
        let spec = ModelSpec::new(model, kk);
        let sampler = SamplerConfig {
            seed: config.master_seed,
            stream_replicate: rep as u64,
            stream_lane: chain_lane(slot, 0, 0),
            ..config.sampler.clone()
        };
        let outcome = fit_model(&spec, &data, &sampler)
            .and_then(|fit| summarize_fit(&fit.draws, &data, &spec, 0.95).map(|s| (fit, s)));
        match outcome {
            Ok((fit, (summaries, lor))) => {
                let rhat_max = lor.max_rhat();
                let total = fit.draws.total_draws();
                let divergences = fit.draws.divergence_count();
                let flagged = rhat_max > RHAT_FLAG
                    || (divergences as f64) > DIVERGENCE_FLAG * total as f64;
                for s in summaries {
                    rows.push(ReplicateRow {
                        replicate: rep,
                        model,
                        subtrial: s.subtrial,
                        lor_mean: s.lor_mean,
                        lor_var: s.lor_var,
                        hdi_low: s.lor_hdi.low,
                        hdi_high: s.lor_hdi.high,
                        success: s.success,
                        rhat_max,
                        divergences,
                        flagged,
                        clamped_draws: lor.clamp_count,
                    });
                }
            }
            Err(_) => failures += 1,
        }
    }
    (rows, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::scenarios::scenario_library;

    fn quick_config(models: Vec<ModelKind>, m: usize, workers: usize) -> RunConfig {
        RunConfig {
            models,
            replicates: m,
            sampler: SamplerConfig {
                chains: 2,
                warmup_iters: 120,
                sampling_iters: 120,
                ..SamplerConfig::desk(0)
            },
            master_seed: 20,
            workers,
            baseline: BaselineModel::default(),
        }
    }

    fn tiny_scenario() -> ScenarioSpec {
        let mut s = scenario_library()["scenario1"].clone();
        s.n_per_arm = 6;
        // Skip calibration in unit tests; intercepts near the achieved
        // values are good enough for shape checks.
        for sub in &mut s.subtrials {
            sub.beta = Some([0.6, 0.8]);
        }
        s
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let scenario = tiny_scenario();
        let out1 = run_replicates(&scenario, &quick_config(vec![ModelKind::BinHierarchical], 4, 1))
            .unwrap();
        let out2 = run_replicates(&scenario, &quick_config(vec![ModelKind::BinHierarchical], 4, 3))
            .unwrap();
        assert_eq!(out1.rows, out2.rows);
        assert_eq!(out1.report, out2.report);
    }

    #[test]
    fn shared_dataset_across_models_and_row_shape() {
        let scenario = tiny_scenario();
        let out = run_replicates(
            &scenario,
            &quick_config(vec![ModelKind::BinHierarchical, ModelKind::BinStratified], 3, 2),
        )
        .unwrap();
        // 3 replicates × 2 models × 3 subtrials.
        assert_eq!(out.rows.len(), 18);
        assert_eq!(out.report.rows.len(), 6);
        for row in &out.report.rows {
            assert_eq!(row.effective_m, 3);
            assert!(row.is_null);
        }
        assert_eq!(out.failures, 0);
    }

    #[test]
    fn single_replicate_degenerates_gracefully() {
        let scenario = tiny_scenario();
        let out = run_replicates(&scenario, &quick_config(vec![ModelKind::BinStratified], 1, 1))
            .unwrap();
        for row in &out.report.rows {
            assert_eq!(row.effective_m, 1);
            assert!(row.bias_mcse.is_none());
            assert!(row.coverage_mcse.is_none());
        }
    }
}
