//! Command-line driver for the eigensolver experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use pmnn::harness::{self, registry, ExperimentConfig, RegistryEntry, RunReport, SweepConfig, FULL_PROFILE};
use pmnn::{Error, Result};

#[derive(Parser)]
#[command(name = "pmnn", version, about = "Neural power and inverse power eigensolvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one experiment, given a TOML file or a registry name.
    Run {
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = FULL_PROFILE)]
        profile: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Print every recorded iteration.
        #[arg(long)]
        verbose: bool,
    },
    /// List registry entries.
    List,
    /// Compare IPMNN with finite differences on a grid sweep.
    SweepFdm {
        /// TOML sweep config; the registry default is used otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = FULL_PROFILE)]
        profile: String,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Summarize a finished run directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    pmnn::runtime::tune_allocator();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = match &e {
                Error::Config(v) => json!(v),
                _ => json!(null),
            };
            eprintln!(
                "{}",
                json!({ "error": e.kind(), "message": e.to_string(), "details": detail })
            );
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            target,
            seed,
            profile,
            out,
            verbose,
        } => match resolve(&target)? {
            Target::Experiment(cfg) => {
                let mut cfg = cfg.with_profile(&profile)?;
                if let Some(s) = seed {
                    cfg.training.seed = s;
                }
                let report = harness::run_with(&cfg, &out, &mut |r| {
                    if verbose {
                        eprintln!("{:>8} loss {:.4e} lambda {:.10}", r.epoch, r.loss, r.lambda);
                    }
                })?;
                println!("{}", report.summary());
                println!("{}", report.artifacts.dir.display());
                Ok(())
            }
            Target::Sweep(cfg) => sweep(cfg, seed, &profile, &out),
        },
        Command::List => {
            for entry in registry::registry() {
                println!("{:<18} {}", entry.name(), entry.summary());
            }
            Ok(())
        }
        Command::SweepFdm {
            config,
            seed,
            profile,
            out,
        } => {
            let cfg = match config {
                Some(p) => SweepConfig::from_toml(&std::fs::read_to_string(p)?)?,
                None => registry::fdm_sweep(),
            };
            sweep(cfg, seed, &profile, &out)
        }
        Command::Report { dir } => {
            let report = RunReport::load(&dir)?;
            println!("{}", report.summary());
            Ok(())
        }
    }
}

fn sweep(cfg: SweepConfig, seed: Option<u64>, profile: &str, out: &Path) -> Result<()> {
    let mut cfg = cfg.with_profile(profile)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let path = harness::run_sweep(&cfg, out)?;
    print!("{}", std::fs::read_to_string(&path)?);
    println!("{}", path.display());
    Ok(())
}

enum Target {
    Experiment(ExperimentConfig),
    Sweep(SweepConfig),
}

fn resolve(target: &str) -> Result<Target> {
    let path = Path::new(target);
    if path.is_file() {
        return Ok(Target::Experiment(ExperimentConfig::load(path)?));
    }
    match registry::lookup(target)? {
        RegistryEntry::Experiment(c) => Ok(Target::Experiment(*c)),
        RegistryEntry::Sweep(s) => Ok(Target::Sweep(s)),
    }
}
