//! `lobflip` — command-line pipeline around the lobflip library:
//! simulate → featurize → train → evaluate → study → bench.
//!
//! Every file-producing subcommand writes a `manifest.json` next to its
//! outputs (config snapshot, input/output SHA-256 hashes, tool version) and
//! verifies upstream manifests before consuming data. Given identical
//! configs and seeds, every output file is byte-identical across reruns.
//!
//! Exit codes: 0 ok, 1 runtime error, 2 usage error.

mod cmd;
mod files;
mod manifest;
mod model;
mod profile;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lobflip", version, about = "Limit-order-book price-flip classification pipeline")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic order-flow sessions as per-session event files.
    Simulate(cmd::simulate::SimulateArgs),
    /// Replay event files into labeled feature CSVs plus a layout manifest.
    Featurize(cmd::featurize::FeaturizeArgs),
    /// Train a classifier on a feature directory and save the model file.
    Train(cmd::train::TrainArgs),
    /// Score a saved model on a feature directory; writes metrics and ROC.
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Run an experiment over an event directory; writes CSVs and SVG plots.
    Study(cmd::study::StudyArgs),
    /// Measure single-prediction forward-pass latency.
    Bench(cmd::bench::BenchArgs),
}

fn init_logging(verbosity: u8) {
    let default = match verbosity {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .format_timestamp(None)
        .init();
}

fn main() {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match cli.command {
        Command::Simulate(args) => cmd::simulate::run(args),
        Command::Featurize(args) => cmd::featurize::run(args),
        Command::Train(args) => cmd::train::run(args),
        Command::Evaluate(args) => cmd::evaluate::run(args),
        Command::Study(args) => cmd::study::run(args),
        Command::Bench(args) => cmd::bench::run(args),
    };
    if let Err(err) = result {
        log::error!("{err:#}");
        std::process::exit(1);
    }
}
