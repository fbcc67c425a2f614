use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod svg;
mod verify;

use config::{Overrides, Run};
use error::CliError;

/// Simulate splitting trees and check their laws against the Lévy-process
/// formulas.
#[derive(Parser)]
#[command(name = "splitree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample trees; write trees, contours and a summary.
    Simulate(CommonArgs),
    /// Tabulate the scale function, against its closed form when there is one.
    Scale(CommonArgs),
    /// Run the goodness-of-fit battery.
    Verify(CommonArgs),
    /// Coalescence depths at tau against the analytic depth law.
    Cpp(CommonArgs),
    /// Widths at tau against the analytic marginal law.
    Marginal(CommonArgs),
    /// Draw a tree with its contour and the depth histogram.
    Plot(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl CommonArgs {
    fn run(&self) -> Result<Run, CliError> {
        Run::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                replicates: self.replicates,
                out: self.out.clone(),
                workers: self.workers,
            },
        )
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => commands::simulate(&a.run()?),
        Command::Scale(a) => commands::scale(&a.run()?),
        Command::Verify(a) => verify::verify(&a.run()?),
        Command::Cpp(a) => commands::cpp(&a.run()?),
        Command::Marginal(a) => commands::marginal_cmd(&a.run()?),
        Command::Plot(a) => commands::plot(&a.run()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splitree: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
