//! Command-line front end: configuration files, the `train`, `simulate`,
//! `infer` and `scan-prior` commands, and the neighbor-search and model
//! inference benchmarks.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub use config::{parse_config, Config};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nnpkit", version, about = "Neural network potentials: training, dynamics and benchmarks")]
pub struct Cli {
    /// Flat `key: value` configuration file; defaults are used without it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (meaning depends on the command).
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Overrides the `seed` setting.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on an extended XYZ file or a binary dataset container.
    Train { dataset: PathBuf },
    /// Run Langevin dynamics from the first frame of a structure file.
    Simulate {
        structure: PathBuf,
        /// Trained model; without it the configured priors alone are used.
        checkpoint: Option<PathBuf>,
    },
    /// Energies and forces of every frame with a trained model.
    Infer { checkpoint: PathBuf, structures: PathBuf },
    /// Neighbor search timings on random particle clouds.
    BenchNeighbors,
    /// Energy and force evaluation throughput of the network.
    BenchModel,
    /// Dimer energy profiles of the configured prior terms.
    ScanPrior,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let output = cli.output.as_deref();
    let or = |default: &'static str| output.unwrap_or(Path::new(default));
    match &cli.command {
        Command::Train { dataset } => commands::train_command(&config, dataset, or("model.ckpt")),
        Command::Simulate { structure, checkpoint } => {
            commands::simulate_command(&config, structure, checkpoint.as_deref(), or("trajectory.xyz"))
        }
        Command::Infer { checkpoint, structures } => {
            commands::infer_command(&config, checkpoint, structures, output)
        }
        Command::BenchNeighbors => commands::bench_neighbors_command(&config, output),
        Command::BenchModel => commands::bench_model_command(&config, output),
        Command::ScanPrior => commands::scan_prior_command(&config, output),
    }
}
