//! Batch command-line front end. All real work happens in
//! `spatialstats::cli`; this binary only parses arguments and maps
//! errors to exit codes (2 for validation problems, 1 for numerical or
//! I/O failures).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spatialstats::cli::{self, CliError, Command, RunOptions};

#[derive(Parser)]
#[command(
    name = "spatial",
    about = "config-driven spatial statistics pipelines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// pipeline configuration file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// seed for stochastic commands; overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (SPATIAL_THREADS overrides)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// empirical semivariogram and optional model fit
    Variogram(Common),
    /// universal kriging over a grid with rasters and a graymap
    Krige(Common),
    /// CAR lattice sampling and optional prediction
    Car(Common),
    /// Poisson / LGCP point-pattern simulation
    #[command(name = "simulate-pp")]
    SimulatePp(Common),
    /// Monte Carlo test of complete spatial randomness
    #[command(name = "csr-test")]
    CsrTest(Common),
    /// bivariate conditional-model prediction
    Cokrige(Common),
    /// scalable approximate kriging over a grid
    #[command(name = "vecchia-krige")]
    VecchiaKrige(Common),
    /// dynamical space-time filtering, smoothing, forecasting
    Kalman(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Variogram(c) => (Command::Variogram, c),
        Sub::Krige(c) => (Command::Krige, c),
        Sub::Car(c) => (Command::Car, c),
        Sub::SimulatePp(c) => (Command::SimulatePp, c),
        Sub::CsrTest(c) => (Command::CsrTest, c),
        Sub::Cokrige(c) => (Command::Cokrige, c),
        Sub::VecchiaKrige(c) => (Command::VecchiaKrige, c),
        Sub::Kalman(c) => (Command::Kalman, c),
    };
    let opts = RunOptions {
        config: common.config,
        out_dir: common.out,
        seed: common.seed,
        threads: common.threads,
    };
    match cli::run(command, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Validation(_)) => {
            eprintln!("spatial {}: {e}", command.name());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("spatial {}: {e}", command.name());
            ExitCode::from(1)
        }
    }
}
