//! `freightinv`: batch front end for the freight emissions and damages pipeline.
//!
//! Exit status: 0 on success, 1 for configuration or input errors, 2 for
//! numerical failures and consistency-check violations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freightinv::pipeline::{self, Command, RunOptions};
use freightinv::{ErrorKind, RunConfig};

#[derive(Parser)]
#[command(
    name = "freightinv",
    version,
    about = "Freight trucking emissions inventory and damage accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Link activity to county and tract emission ledgers.
    BuildInventory(RunArgs),
    /// Zone and national damages from the MSC surface and the social cost of carbon.
    Damages(RunArgs),
    /// Source-receptor import/export ledger with net-importer flags.
    SrLedger(RunArgs),
    /// Emission and importer-status regressions with residual diagnostics.
    EjRegress(RunArgs),
    /// Truck-to-rail shift sweep.
    ModalShift(RunArgs),
    /// Every stage in sequence.
    All(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `workers` in the configuration.
    #[arg(long, short)]
    workers: Option<usize>,
}

fn exit_code(kind: ErrorKind) -> ExitCode {
    match kind {
        ErrorKind::Input => ExitCode::from(1),
        ErrorKind::Numerical => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::BuildInventory(a) => (Command::BuildInventory, a),
        Cmd::Damages(a) => (Command::Damages, a),
        Cmd::SrLedger(a) => (Command::SrLedger, a),
        Cmd::EjRegress(a) => (Command::EjRegress, a),
        Cmd::ModalShift(a) => (Command::ModalShift, a),
        Cmd::All(a) => (Command::All, a),
    };

    let config = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            return exit_code(e.kind());
        }
    };
    let opts = RunOptions {
        output_dir: args.out,
        workers: args.workers,
    };
    match pipeline::run(command, &config, &opts) {
        Ok(report) => {
            for m in &report.messages {
                println!("{m}");
            }
            println!(
                "{}: wrote {} file(s) and {} to {}",
                command.name(),
                report.manifest.outputs.len(),
                pipeline::MANIFEST_FILE,
                report.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}
