//! Command-line front end: train and evaluate linear models on libsvm data,
//! rerun the synthetic schedule experiments, and run the verification suite.

mod commands;
mod config;
mod report;
mod snapshot;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "asgd",
    version,
    about = "One-pass averaged-SGD training for linear models, with a numerical verification lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a libsvm file and evaluate against a held-out set.
    Train(commands::train::TrainArgs),
    /// Evaluate a saved model snapshot on a libsvm file.
    Eval(commands::eval::EvalArgs),
    /// Rerun the synthetic schedule-comparison experiments.
    Synthetic(commands::synthetic::SyntheticArgs),
    /// Run the bound-verification suite; exits nonzero on any failure.
    Verify(commands::verify::VerifyArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Synthetic(args) => commands::synthetic::run(args),
        Command::Verify(args) => commands::verify::run(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": format!("{err:#}") })
            );
            std::process::exit(1);
        }
    }
}
