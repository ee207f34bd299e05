use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod generate;
mod problem;
mod run;

use config::{RunArgs, RunConfig};

/// Assemble and benchmark proximal gradient methods.
#[derive(Parser)]
#[command(name = "proxpol", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write a convergence CSV, or run one
    /// parameter-server role.
    Run(Box<RunArgs>),
    /// Write a seeded synthetic data set in LIBSVM format.
    GenerateDataset(generate::DatasetArgs),
    /// Write the parameters of a random QP so several processes can share it.
    GenerateQp(generate::QpArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args
            .with_file()
            .and_then(RunConfig::from_args)
            .and_then(|cfg| run::run(&cfg)),
        Command::GenerateDataset(a) => generate::dataset(&a),
        Command::GenerateQp(a) => generate::qp(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("proxpol: {e}");
            e.exit_code()
        }
    }
}
