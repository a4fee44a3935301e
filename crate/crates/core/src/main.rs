use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use taxilim::config::{parse_config, RunConfig, RunVariant};
use taxilim::harness::{run, run_mms};
use taxilim::snapshot::{compare, read_snapshot};
use taxilim::{Result, SimError};

#[derive(Parser)]
#[command(name = "taxilim", about = "Taxis-coupled reaction-diffusion runs and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured simulation (indirect, limit or sweep).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Execute a relaxation sweep; the config must carry a [sweep] section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Compare two snapshot files column by column.
    Compare {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long)]
        tol: f64,
    },
    /// Manufactured-solution refinement ladder for the configured model.
    Mms {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out, quiet } => {
            let cfg = load_config(&config)?;
            run(&cfg, out.as_deref(), quiet)?;
            Ok(0)
        }
        Command::Sweep { config, out, quiet } => {
            let cfg = load_config(&config)?;
            if cfg.variant != RunVariant::Sweep {
                return Err(SimError::Config(
                    "sweep subcommand needs a config with a [sweep] eps list".into(),
                ));
            }
            run(&cfg, out.as_deref(), quiet)?;
            Ok(0)
        }
        Command::Compare { file_a, file_b, tol } => {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(SimError::Config(format!("tol must be >= 0, got {tol}")));
            }
            let a = read_snapshot(&file_a)?;
            let b = read_snapshot(&file_b)?;
            let report = compare(&a, &b)?;
            for d in &report.diffs {
                println!("column {}: max |diff| = {:.3e} at row {}", d.name, d.max_abs_diff, d.row);
            }
            if report.passes(tol) {
                println!("pass (tol {tol:.3e})");
                Ok(0)
            } else {
                println!("fail (tol {tol:.3e})");
                Ok(1)
            }
        }
        Command::Mms { config, out, quiet } => {
            let cfg = load_config(&config)?;
            run_mms(&cfg, out.as_deref(), quiet)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error ({}): {e}", e.category());
            let code = match e.category() {
                "config" => 2,
                "solver" => 3,
                "blowup" => 4,
                _ => 5,
            };
            ExitCode::from(code)
        }
    }
}
