//! `sigtest`: simulate paths, fit signature statistics, score, test and benchmark.

mod commands;
mod config;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "sigtest",
    version,
    about = "Signature-based novelty tests on path data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (bm, spike, fbm, researchers).
    Simulate(RunConfig),
    /// Fit a statistic on reference paths and write a model file.
    Fit(RunConfig),
    /// Score paths under a fitted model.
    Score(RunConfig),
    /// p-values, multiple-testing correction and error rates.
    Test(RunConfig),
    /// Run the synthetic benchmark panels.
    Bench(RunConfig),
}

type Body = fn(&RunConfig) -> CliResult<()>;

fn run(cli: Cli) -> CliResult<()> {
    let (name, flags, body): (&str, RunConfig, Body) = match cli.command {
        Command::Simulate(c) => ("simulate", c, commands::simulate),
        Command::Fit(c) => ("fit", c, commands::fit),
        Command::Score(c) => ("score", c, commands::score),
        Command::Test(c) => ("test", c, commands::test),
        Command::Bench(c) => ("bench", c, commands::bench),
    };
    body(&RunConfig::resolve(flags, name)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sigtest: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
