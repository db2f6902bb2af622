//! `featdiv`: train MLPs, probe feature diversity, evaluate the diversity-aware
//! generalization bounds and run the MNIST experiments.

mod commands;
mod config;
mod error;
mod rundir;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{bound, experiment, fetch, train, verify};

#[derive(Debug, Parser)]
#[command(name = "featdiv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model and write its run record, probes and checkpoint.
    Train(train::TrainArgs),
    /// Evaluate a generalization bound for a checkpoint on a dataset.
    Bound(bound::BoundArgs),
    /// Measure feature diversity of a checkpoint's hidden layers.
    Probe(bound::ProbeArgs),
    /// Run gap-correlation, epoch-tracking or depth-sweep.
    Experiment(experiment::ExperimentArgs),
    /// Run the numerical verification suite; exits 1 if any check fails.
    Verify(verify::VerifyArgs),
    /// Place the four MNIST files in a directory and check their digests.
    FetchMnist(fetch::FetchArgs),
    /// Regenerate a run from its manifest and compare the CSV outputs byte for byte.
    Rerun(experiment::RerunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_USAGE as u8 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Bound(a) => bound::run(a),
        Command::Probe(a) => bound::probe(a),
        Command::Experiment(a) => experiment::run(a),
        Command::Verify(a) => verify::run(a),
        Command::FetchMnist(a) => fetch::run(a),
        Command::Rerun(a) => experiment::rerun(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
