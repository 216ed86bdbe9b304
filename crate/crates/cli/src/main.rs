mod commands;
mod manifest;
mod seeds;

use clap::{Parser, Subcommand};
use sgru_core::Error;

/// Exit codes: 0 success, 1 failed check, 2 usage or data error, 3 numeric
/// divergence.
#[derive(Parser)]
#[command(name = "sgru", version, about = "Graph-recurrent traffic forecasting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic traffic CSV.
    Synth(commands::synth::SynthArgs),
    /// Train one or more seeds and write checkpoints.
    Train(commands::train::TrainArgs),
    /// Score a checkpoint on a data split.
    Eval(commands::eval::EvalArgs),
    /// Forecast every complete window of a CSV.
    Predict(commands::predict::PredictArgs),
    /// Compare tape gradients against central differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Train every variant over a seed set and tabulate validation error.
    Ablate(commands::ablate::AblateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
    };
    let code = match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numeric { .. } => commands::EXIT_DIVERGED,
                _ => 2,
            }
        }
    };
    std::process::exit(i32::from(code));
}
