//! `jsfr` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid config, 2 identity-check failure, 3 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jsfr_core::harness::{self, ExperimentConfig, SweepResult};
use jsfr_core::Error;

#[derive(Parser)]
#[command(name = "jsfr", version, about = "Jones-space field recovery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write CSV results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the config's base point, ignoring any sweep axes.
    Run { config: PathBuf },
    /// Run every point of the config's sweep.
    Sweep { config: PathBuf },
    /// Check the CSPR algebra and photocurrent identities.
    VerifyIdentities,
    /// Run a committed preset sweep.
    Preset {
        /// One of fig2a, fig2b, fig3a, fig3b, cspr-sweep, xi-sweep, carrier-boost.
        name: String,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        print_config: bool,
    },
}

enum Failure {
    Config(String),
    Identity,
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<(), Failure> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials_per_point = t;
    }
    cfg.validate()?;
    Ok(())
}

fn emit(cli: &Cli, result: &SweepResult) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => {
            harness::write_csv(result, path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {} rows to {}", result.rows.len(), path.display());
        }
        None => harness::emit_csv(result, std::io::stdout().lock())?,
    }
    Ok(())
}

fn summarize(result: &SweepResult) {
    for (point, ber) in result.mean_ber() {
        let cols: Vec<String> = result.columns.iter().zip(&point).map(|(c, v)| format!("{c}={v:.4}")).collect();
        eprintln!("{:<40} mean BER {ber:.3e}", cols.join(" "));
    }
}

fn run_sweep(cli: &Cli, mut cfg: ExperimentConfig) -> Result<(), Failure> {
    apply_overrides(cli, &mut cfg)?;
    let result = harness::sweep(&cfg, cli.workers)?;
    summarize(&result);
    emit(cli, &result)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load(config)?;
            cfg.sweep.axes.clear();
            run_sweep(cli, cfg)
        }
        Command::Sweep { config } => run_sweep(cli, load(config)?),
        Command::VerifyIdentities => {
            let report = harness::verify_identities();
            let mut out = std::io::stdout().lock();
            write!(out, "{report}").map_err(io_err)?;
            writeln!(out, "worst residual {:.3e}", report.worst_residual()).map_err(io_err)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Identity)
            }
        }
        Command::Preset { name, print_config } => {
            let cfg = harness::preset(name)?;
            if *print_config {
                print!("{}", harness::presets::preset_text(name)?);
                return Ok(());
            }
            run_sweep(cli, cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Identity) => {
            eprintln!("error: identity checks failed");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
