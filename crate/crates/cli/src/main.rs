use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pns_core::harness::{run_experiment, write_exact, ExperimentConfig, ModelSpec, WORKERS_ENV};
use pns_core::Error;

#[derive(Parser)]
#[command(
    name = "pns",
    about = "Rejection-free and partial neighbor search MCMC experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config and write its CSV.
    #[command(after_help = format!("Set {WORKERS_ENV} to cap the number of worker threads."))]
    Run { config: PathBuf },
    /// Print the exact distribution of an enumerable model as CSV.
    ///
    /// MODEL is one of: triangle, hypercube16, qubo:n=16,std=1,seed=0,
    /// qubo-file:<path>.
    Exact { model: String },
    /// Print the version.
    Version,
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let rows = run_experiment(&config)?;
            log::info!("wrote {} rows to {}", rows.len(), config.output.display());
            Ok(())
        }
        Command::Exact { model } => {
            let spec = ModelSpec::parse(&model)?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write_exact(&spec, &mut out)?;
            out.flush().map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })?;
            Ok(())
        }
        Command::Version => {
            println!("pns {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
