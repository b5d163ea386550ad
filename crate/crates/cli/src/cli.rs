//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "augbin",
    version,
    about = "Augmented-binary basket-trial engine: joint latent-variable fits, \
             binary comparators, and operating-characteristic simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit one model to a subject-level CSV and write draws and summaries.
    Fit(FitArgs),
    /// Run a simulation study over one scenario.
    Simulate(SimulateArgs),
    /// Calibrate scenario intercepts to the target response rates.
    Calibrate(CalibrateArgs),
    /// Recompute diagnostics from a saved draws file.
    Diagnose(DiagnoseArgs),
    /// List the built-in scenario library.
    Scenarios,
}

#[derive(Args)]
pub struct SamplerOpts {
    /// Sampler preset: `desk` (2×1000 after 500 warm-up) or `paper`
    /// (2×10000 after 5000 warm-up).
    #[arg(long, default_value = "desk")]
    pub preset: String,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub sampling: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Master seed; all chain/replicate streams derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct FitArgs {
    /// Subject-level CSV (`subtrial,treatment,baseline,y_continuous,y_binary`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model kind: abba, abba-strat, bin, bin-strat.
    #[arg(long)]
    pub model: String,
    /// Responder threshold on the continuous outcome (log-score units).
    #[arg(long, default_value_t = 20.0_f64.ln())]
    pub threshold: f64,
    /// Responder direction: `above` or `below` the threshold.
    #[arg(long, default_value = "above", value_parser = ["above", "below"])]
    pub direction: String,
    #[command(flatten)]
    pub sampler: SamplerOpts,
    /// Output directory for draws.bin, summary.csv, diagnostics.csv,
    /// manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Name from the scenario library (see `augbin scenarios`).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario file to run instead of a library entry.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Comma-separated model kinds to fit on every replicate.
    #[arg(long, default_value = "abba,bin")]
    pub models: String,
    /// Number of replicates.
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Worker thread count (default: AUGBIN_WORKERS or all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub baseline_log_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub baseline_log_sd: f64,
    #[command(flatten)]
    pub sampler: SamplerOpts,
    /// Output directory for replicates.csv, aggregate.csv, manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub baseline_log_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub baseline_log_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output scenario file with calibrated intercepts filled in.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    /// A draws.bin written by `fit`.
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
