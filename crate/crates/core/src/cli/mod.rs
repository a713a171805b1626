//! Command-line front-end.
//!
//! ```text
//! consensus-dyn optimize|sample|meanfield|verify|render --config <path>
//!     [--out <dir>] [--seed <u64>] [--workers <n>]
//! ```
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 numerical
//! blow-up, 4 verification failure.

pub mod commands;
pub mod config;
pub mod table;
pub mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use commands::{execute, Artifacts, OutputFile, RunError, Subcommand};
pub use config::{ConfigError, RunConfig};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BLOW_UP: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;

pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Parser)]
#[command(name = "consensus-dyn", version, about = "Consensus-based optimization and sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Run CBO or CBS with λ = 1 and report convergence to the minimizer.
    Optimize(CommonArgs),
    /// Run CBS with λ = (1+β)⁻¹ and compare against the Gaussian target.
    Sample(CommonArgs),
    /// Fokker–Planck residual scaling and cross-J W₂ study.
    Meanfield(CommonArgs),
    /// Randomized inequality and certificate checks.
    Verify(CommonArgs),
    /// Write gnuplot data files for one trajectory.
    Render(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (overrides `workers` in the config).
    #[arg(long, env = "CONSENSUS_DYN_WORKERS")]
    pub workers: Option<usize>,
}

impl Command {
    fn parts(&self) -> (Subcommand, &CommonArgs) {
        match self {
            Command::Optimize(a) => (Subcommand::Optimize, a),
            Command::Sample(a) => (Subcommand::Sample, a),
            Command::Meanfield(a) => (Subcommand::Meanfield, a),
            Command::Verify(a) => (Subcommand::Verify, a),
            Command::Render(a) => (Subcommand::Render, a),
        }
    }
}

/// Sidecar describing a run; the only output that is allowed to differ
/// between identical reruns.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub program_version: &'static str,
    pub subcommand: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub platform: String,
    pub timestamp_unix: u64,
    pub files: Vec<String>,
    pub verification_failure: Option<String>,
}

pub fn platform_triple() -> String {
    format!("{}-{}-{}", std::env::consts::ARCH, std::env::consts::FAMILY, std::env::consts::OS)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and validates the config, applying `--seed`.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<(RunConfig, Vec<u8>), ConfigError> {
    let raw = std::fs::read(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&raw).map_err(|_| ConfigError("config is not UTF-8".into()))?;
    let mut cfg = RunConfig::from_json(text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, raw))
}

fn write_outputs(dir: &Path, artifacts: &Artifacts, manifest: &Manifest) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in &artifacts.files {
        std::fs::write(dir.join(&f.name), &f.bytes)?;
    }
    let mut json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    json.push(b'\n');
    std::fs::write(dir.join("manifest.json"), json)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> ExitCode {
    let (sub, args) = cli.command.parts();
    let (cfg, raw) = match load_config(&args.config, args.seed) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let workers = match args.workers.or(cfg.workers) {
        Some(0) => {
            eprintln!("error: config error: workers must be ≥ 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_OTHER);
        }
    };
    let artifacts = match pool.install(|| execute(sub, &cfg)) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                RunError::Config(_) => EXIT_CONFIG,
                RunError::BlowUp { config, .. } => {
                    eprintln!("config:\n{config}");
                    EXIT_BLOW_UP
                }
                RunError::Numerical(_) | RunError::Io(_) => EXIT_OTHER,
            });
        }
    };
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION,
        program_version: env!("CARGO_PKG_VERSION"),
        subcommand: sub.as_str(),
        config_sha256: sha256_hex(&raw),
        seed: cfg.seed,
        workers,
        platform: platform_triple(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        files: artifacts.files.iter().map(|f| f.name.clone()).collect(),
        verification_failure: artifacts.failure.clone(),
    };
    if let Err(e) = write_outputs(&dir, &artifacts, &manifest) {
        eprintln!("error: cannot write results to {}: {e}", dir.display());
        return ExitCode::from(EXIT_OTHER);
    }
    println!("{}", artifacts.summary);
    println!("results written to {}", dir.display());
    match &artifacts.failure {
        Some(reason) => {
            eprintln!("verification failed: {reason}");
            ExitCode::from(EXIT_VERIFICATION)
        }
        None => ExitCode::SUCCESS,
    }
}

pub fn main_entry() -> ExitCode {
    run(Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from(["consensus-dyn", "verify", "--config", "c.json", "--seed", "5", "--workers", "2"])
            .unwrap();
        let (sub, args) = cli.command.parts();
        assert_eq!(sub, Subcommand::Verify);
        assert_eq!((args.seed, args.workers), (Some(5), Some(2)));
        assert!(Cli::try_parse_from(["consensus-dyn", "verify"]).is_err());
        assert!(Cli::try_parse_from(["consensus-dyn", "plot", "--config", "c.json"]).is_err());
    }

    #[test]
    fn seed_override_applies() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 1}"#).unwrap();
        assert_eq!(load_config(&path, Some(9)).unwrap().0.seed, 9);
        assert_eq!(load_config(&path, None).unwrap().0.seed, 1);
        assert!(load_config(&dir.path().join("missing.json"), None).is_err());
    }
}
