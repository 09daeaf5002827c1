use std::process::ExitCode;

use clap::{Parser, Subcommand};
use turnpike_cli::commands::{
    cmd_analyze, cmd_gen, cmd_grid, cmd_repro, cmd_train, AnalyzeArgs, GenArgs, GridArgs,
    ReproArgs, TrainArgs,
};

#[derive(Debug, Parser)]
#[command(name = "turnpike", version, about = "Residual-network training as optimal control, with turnpike depth bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a two-spiral dataset as CSV.
    Gen(GenArgs),
    /// Train a residual network on a dataset.
    Train(TrainArgs),
    /// Compute turnpike diagnostics and depth bounds for a trained model.
    Analyze(AnalyzeArgs),
    /// Classify a regular grid of inputs.
    Grid(GridArgs),
    /// Reproduce a depth-bound table over several depths and sample sizes.
    Repro(ReproArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Repro(a) => cmd_repro(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
