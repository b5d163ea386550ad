//! Subcommand implementations.

use std::path::{Path, PathBuf};

use augbin_core::fit::fit_model;
use augbin_core::models::{Dataset, Direction, ModelKind, ModelSpec, ResponderRule};
use augbin_core::numkit::rng::{stream, StreamPurpose};
use augbin_core::posterior::summarize_fit;
use augbin_core::sampler::{diagnostics, SamplerConfig};
use augbin_core::simlab::{
    calibrate_with_rates, run_replicates, scenario_library, with_calibrated_beta, BaselineModel,
    RunConfig, ScenarioSpec,
};

use crate::cli::{CalibrateArgs, DiagnoseArgs, FitArgs, SamplerOpts, SimulateArgs};
use crate::errors::{CliError, CliResult};
use crate::formats::dataset::read_dataset;
use crate::formats::draws_file::{read_draws, write_draws};
use crate::formats::manifest::RunManifest;
use crate::formats::reports::{
    write_aggregate, write_diagnostics, write_replicates, write_summaries,
};
use crate::formats::scenario_file::{read_scenario, write_scenario};

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn sampler_config(opts: &SamplerOpts) -> CliResult<SamplerConfig> {
    let mut config = SamplerConfig::preset(&opts.preset, opts.seed)?;
    if let Some(c) = opts.chains {
        config.chains = c;
    }
    if let Some(w) = opts.warmup {
        config.warmup_iters = w;
    }
    if let Some(s) = opts.sampling {
        config.sampling_iters = s;
    }
    if let Some(t) = opts.target_accept {
        config.target_accept = t;
    }
    if let Some(d) = opts.max_depth {
        config.max_tree_depth = d;
    }
    config.validate()?;
    Ok(config)
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let loaded = read_dataset(&args.data)?;
    let data = Dataset::new(loaded.records).map_err(CliError::from)?;
    let kind = ModelKind::parse(&args.model)?;
    let rule = ResponderRule {
        threshold: args.threshold,
        direction: if args.direction == "below" {
            Direction::Below
        } else {
            Direction::Above
        },
        success_requires_no_failure: true,
    };
    let spec = ModelSpec {
        rule,
        ..ModelSpec::new(kind, data.n_subtrials())
    };
    let config = sampler_config(&args.sampler)?;

    let mut manifest = RunManifest::new(
        "fit",
        config.seed,
        serde_json::json!({
            "model": kind.label(),
            "spec": &spec,
            "sampler": &config,
            "data": args.data.display().to_string(),
        }),
    );
    manifest.record_input(&args.data)?;
    manifest.subtrial_labels = loaded.labels;

    let outcome = fit_model(&spec, &data, &config)?;
    let (summaries, lor) = summarize_fit(&outcome.draws, &data, &spec, 0.95)?;
    let diag = diagnostics(&outcome.draws);

    ensure_out_dir(&args.out)?;
    write_draws(&args.out.join("draws.bin"), &outcome.draws)?;
    write_summaries(&args.out.join("summary.csv"), &summaries)?;
    write_diagnostics(&args.out.join("diagnostics.csv"), &diag)?;
    manifest.finish();
    manifest.write(&args.out.join("manifest.json"))?;

    for s in &summaries {
        println!(
            "subtrial {}: lor {:.4} [{:.4}, {:.4}] success={}",
            s.subtrial, s.lor_mean, s.lor_hdi.low, s.lor_hdi.high, s.success
        );
    }
    println!(
        "max split-rhat {:.4} | lambda rhat {:.4} | divergences {} | clamped {}",
        diag.max_rhat(),
        lor.max_rhat(),
        diag.divergences,
        lor.clamp_count
    );
    Ok(())
}

fn resolve_scenario(
    name: Option<&str>,
    file: Option<&Path>,
) -> CliResult<(ScenarioSpec, Option<PathBuf>)> {
    match (name, file) {
        (Some(n), None) => {
            let lib = scenario_library();
            let spec = lib.get(n).cloned().ok_or_else(|| {
                CliError::malformed(format!(
                    "unknown scenario `{n}`; valid names: {}",
                    lib.keys().cloned().collect::<Vec<_>>().join(", ")
                ))
            })?;
            Ok((spec, None))
        }
        (None, Some(f)) => Ok((read_scenario(f)?, Some(f.to_path_buf()))),
        _ => Err(CliError::malformed(
            "exactly one of --scenario and --scenario-file is required",
        )),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let (scenario, scenario_file) =
        resolve_scenario(args.scenario.as_deref(), args.scenario_file.as_deref())?;
    let mut models = Vec::new();
    for part in args.models.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        models.push(ModelKind::parse(part)?);
    }
    if models.is_empty() {
        return Err(CliError::malformed("no models requested"));
    }

    let sampler = sampler_config(&args.sampler)?;
    let workers = args.workers.unwrap_or_else(default_workers);
    let baseline = BaselineModel {
        log_mean: args.baseline_log_mean,
        log_sd: args.baseline_log_sd,
    };
    let run_config = RunConfig {
        models: models.clone(),
        replicates: args.m,
        sampler: sampler.clone(),
        master_seed: args.sampler.seed,
        workers,
        baseline,
    };

    let mut manifest = RunManifest::new(
        "simulate",
        args.sampler.seed,
        serde_json::json!({
            "scenario": &scenario,
            "models": models.iter().map(|m| m.label()).collect::<Vec<_>>(),
            "replicates": args.m,
            "sampler": &sampler,
            "workers": workers,
            "baseline": &baseline,
        }),
    );
    if let Some(f) = &scenario_file {
        manifest.record_input(f)?;
    }

    let out = run_replicates(&scenario, &run_config)?;

    ensure_out_dir(&args.out)?;
    write_replicates(&args.out.join("replicates.csv"), &out.rows)?;
    write_aggregate(&args.out.join("aggregate.csv"), &out.report)?;
    let calibrated = with_calibrated_beta(&scenario, &out.calibrated_beta);
    write_scenario(
        &args.out.join("scenario_calibrated.txt"),
        &calibrated,
        &["intercepts as used for generation".to_string()],
    )?;
    manifest.finish();
    manifest.write(&args.out.join("manifest.json"))?;

    for row in &out.report.rows {
        println!(
            "{} subtrial {}: {}={:.3} width={:.3} coverage={:.3} bias={:+.3}",
            row.model.label(),
            row.subtrial,
            row.rejection_label(),
            row.rejection_rate,
            row.mean_width,
            row.coverage,
            row.bias
        );
    }
    if out.failures > 0 {
        eprintln!("warning: {} fit(s) failed and were excluded", out.failures);
    }
    Ok(())
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> CliResult<()> {
    let (scenario, scenario_file) =
        resolve_scenario(args.scenario.as_deref(), args.scenario_file.as_deref())?;
    let baseline = BaselineModel {
        log_mean: args.baseline_log_mean,
        log_sd: args.baseline_log_sd,
    };
    let mut rng = stream(args.seed, StreamPurpose::Calibration, 0, 0);
    let (beta, rates) = calibrate_with_rates(&scenario, &baseline, &mut rng)?;
    let calibrated = with_calibrated_beta(&scenario, &beta);

    let mut comments = vec![format!(
        "calibrated with seed {} against baseline log-normal({}, {}^2)",
        args.seed, baseline.log_mean, baseline.log_sd
    )];
    for (i, (r, sub)) in rates.iter().zip(&scenario.subtrials).enumerate() {
        comments.push(format!(
            "subtrial {}: achieved control {:.4} (target {}), treatment {:.4} (target {})",
            i + 1,
            r.control,
            sub.target_rr_control,
            r.treatment,
            sub.target_rr_treatment
        ));
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_scenario(&args.out, &calibrated, &comments)?;

    let mut manifest = RunManifest::new(
        "calibrate",
        args.seed,
        serde_json::json!({
            "scenario": &calibrated,
            "baseline": &baseline,
            "achieved": rates
                .iter()
                .map(|r| serde_json::json!({"control": r.control, "treatment": r.treatment}))
                .collect::<Vec<_>>(),
        }),
    );
    if let Some(f) = &scenario_file {
        manifest.record_input(f)?;
    }
    manifest.finish();
    manifest.write(&args.out.with_extension("manifest.json"))?;

    for c in &comments[1..] {
        println!("{c}");
    }
    Ok(())
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let draws = read_draws(&args.draws)?;
    let diag = diagnostics(&draws);
    ensure_out_dir(&args.out)?;
    write_diagnostics(&args.out.join("diagnostics.csv"), &diag)?;

    let mut manifest = RunManifest::new(
        "diagnose",
        0,
        serde_json::json!({
            "draws": args.draws.display().to_string(),
            "chains": draws.n_chains(),
            "draws_per_chain": draws.n_draws,
            "dim": draws.dim(),
        }),
    );
    manifest.record_input(&args.draws)?;
    manifest.finish();
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "{} coordinates | max split-rhat {:.4} | min bulk-ess {:.0} | divergences {} | max-depth hits {}",
        draws.dim(),
        diag.max_rhat(),
        diag.min_ess(),
        diag.divergences,
        diag.max_depth_hits
    );
    Ok(())
}

pub fn cmd_scenarios() -> CliResult<()> {
    for (name, spec) in scenario_library() {
        println!(
            "{name}: {} subtrials, {} per arm, sigma1 {}, rho {}",
            spec.subtrials.len(),
            spec.n_per_arm,
            spec.sigma1,
            spec.rho
        );
        for (i, s) in spec.subtrials.iter().enumerate() {
            println!(
                "  subtrial {}: gamma ({}, {}), theta ({}, {}), targets ({}, {}), true lor {}",
                i + 1,
                s.gamma[0],
                s.gamma[1],
                s.theta[0],
                s.theta[1],
                s.target_rr_control,
                s.target_rr_treatment,
                s.true_lor
            );
        }
    }
    Ok(())
}

pub fn default_workers() -> usize {
    if let Ok(v) = std::env::var("AUGBIN_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
