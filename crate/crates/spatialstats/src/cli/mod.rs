//! Config-driven batch pipelines behind the `spatial` binary: data
//! ingestion, model runs, and atomic emission of prediction grids,
//! simulation outputs, test reports, and plot files.
//!
//! Configs are flat `key = value` files; the subcommand picks the
//! pipeline. Every stochastic command requires a seed (config key or
//! `--seed`), and fixed seed plus fixed inputs gives byte-identical
//! outputs regardless of the thread count.

mod commands;
mod config;

use std::path::{Path, PathBuf};

pub use config::ConfigMap;

use crate::error::Error;

/// Which pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Variogram,
    Krige,
    Car,
    SimulatePp,
    CsrTest,
    Cokrige,
    VecchiaKrige,
    Kalman,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Variogram => "variogram",
            Command::Krige => "krige",
            Command::Car => "car",
            Command::SimulatePp => "simulate-pp",
            Command::CsrTest => "csr-test",
            Command::Cokrige => "cokrige",
            Command::VecchiaKrige => "vecchia-krige",
            Command::Kalman => "kalman",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Command::Car | Command::SimulatePp | Command::CsrTest)
    }
}

/// Pipeline failure, split by exit code: validation problems exit 2,
/// numerical or I/O failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Maps a library error arising while checking the configuration to a
/// validation failure (exit 2).
fn validate<T>(r: crate::error::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Validation(e.to_string()))
}

/// Maps a library error arising during computation to a numerical
/// failure (exit 1).
fn numeric<T>(r: crate::error::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::Numeric)
}

/// Invocation options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    /// overrides the config's seed when set
    pub seed: Option<u64>,
    /// worker threads; `SPATIAL_THREADS` overrides this
    pub threads: Option<usize>,
}

/// Runs a pipeline end to end: parse and validate the config, execute
/// inside a sized thread pool, and write all declared outputs atomically
/// (temp file + rename). On any failure, no output file is left behind.
pub fn run(command: Command, opts: &RunOptions) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&opts.config).map_err(|e| {
        CliError::Validation(format!("cannot read config `{}`: {e}", opts.config.display()))
    })?;
    let mut cfg = ConfigMap::parse(&text)?;
    let base_dir = opts
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    // seed: CLI flag wins over the config key
    let config_seed = cfg.take_u64("seed").transpose()?;
    let seed = opts.seed.or(config_seed);
    if command.needs_seed() && seed.is_none() {
        return Err(CliError::Validation(format!(
            "key `seed` is required for the stochastic command `{}`",
            command.name()
        )));
    }

    let threads = std::env::var("SPATIAL_THREADS")
        .ok()
        .map(|raw| {
            raw.parse::<usize>().map_err(|_| {
                CliError::Validation(format!("SPATIAL_THREADS: bad integer `{raw}`"))
            })
        })
        .transpose()?
        .or(opts.threads);

    let exec = || -> Result<Vec<(String, Vec<u8>)>, CliError> {
        match command {
            Command::Variogram => commands::variogram(cfg, &base_dir),
            Command::Krige => commands::krige(cfg, &base_dir),
            Command::Car => commands::car(cfg, &base_dir, seed.unwrap()),
            Command::SimulatePp => commands::simulate_pp(cfg, &base_dir, seed.unwrap()),
            Command::CsrTest => commands::csr_test(cfg, &base_dir, seed.unwrap()),
            Command::Cokrige => commands::cokrige(cfg, &base_dir),
            Command::VecchiaKrige => commands::vecchia_krige(cfg, &base_dir),
            Command::Kalman => commands::kalman(cfg, &base_dir),
        }
    };

    let files = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Validation(format!("key `threads`: {e}")))?;
            pool.install(exec)?
        }
        None => exec()?,
    };

    write_outputs(&opts.out_dir, &files)
}

/// Stages every output in memory first, then writes temp files and
/// renames them into place.
fn write_outputs(out_dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(files.len());
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = std::fs::remove_file(tmp);
        }
    };
    for (name, bytes) in files {
        let tmp = out_dir.join(format!(".tmp.{name}"));
        if let Err(e) = std::fs::write(&tmp, bytes) {
            cleanup(&staged);
            return Err(e.into());
        }
        staged.push((tmp, out_dir.join(name)));
    }
    for (tmp, target) in &staged {
        if let Err(e) = std::fs::rename(tmp, target) {
            cleanup(&staged);
            return Err(e.into());
        }
    }
    Ok(())
}

/// Resolves a config-relative input path and requires it to exist.
fn input_path(base: &Path, raw: &str, key: &str) -> Result<PathBuf, CliError> {
    let path = if Path::new(raw).is_absolute() {
        PathBuf::from(raw)
    } else {
        base.join(raw)
    };
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "key `{key}`: file `{}` does not exist",
            path.display()
        )));
    }
    Ok(path)
}
