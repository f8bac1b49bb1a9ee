mod config;
mod run;
mod staging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use halfline::Preset;

use config::{ExperimentConfig, PotentialSpec, RunMode};
use run::Command;
use staging::StagedDir;

/// Worker threads for parallel sweeps; defaults to all cores.
const WORKERS_ENV: &str = "HALFLINE_WORKERS";

const EXIT_PROPERTY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

#[derive(Parser)]
#[command(name = "halfline", version, about = "Scattering, dispersive decay and Strichartz experiments for half-line Schrodinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (replaces the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mode: Option<RunMode>,
    /// Seed for randomized forcing.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Named potential (replaces the config's `potential`).
    #[arg(long, global = true)]
    preset: Option<Preset>,
}

fn configure(cli: &Cli) -> halfline::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = cli.preset {
        cfg.potential = Some(PotentialSpec::Preset(p));
    }
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn workers() -> Result<(), String> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = workers() {
        eprintln!("error [config]: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error [config]: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let target = cfg.out.clone().unwrap_or_else(|| PathBuf::from("halfline-out"));
    let stage = match StagedDir::new(&target) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error [output]: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let report = match run::run(cli.command, &cfg, &stage) {
        Ok(r) => r,
        Err(e) => {
            let kind = if matches!(e, halfline::Error::Config(_)) { EXIT_CONFIG } else { EXIT_PIPELINE };
            eprintln!("error [{}]: {e}", cli.command.name());
            return ExitCode::from(kind);
        }
    };
    let dir = match stage.commit() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error [output]: {e}");
            return ExitCode::from(EXIT_PIPELINE);
        }
    };
    for l in &report.summary {
        println!("{l}");
    }
    println!("outputs in {}", dir.display());
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_PROPERTY)
    }
}
