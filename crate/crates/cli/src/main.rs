mod cli;
mod commands;
mod errors;
mod formats;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let result = match &parsed.command {
        Command::Fit(args) => commands::cmd_fit(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Calibrate(args) => commands::cmd_calibrate(args),
        Command::Diagnose(args) => commands::cmd_diagnose(args),
        Command::Scenarios => commands::cmd_scenarios(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
