//! `sabc`: batch front-end for simulated-annealing ABC.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

use crate::commands::{prepare_out_dir, write_error_record, Command, Invocation, Outcome};
use crate::config::parse_config;
use crate::error::{CliError, ErrorRecord};

#[derive(Parser, Debug)]
#[command(name = "sabc", version, about = "Simulated-annealing approximate Bayesian computation")]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// TOML run file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; must be empty or absent unless --force.
    #[arg(long)]
    out: PathBuf,

    /// Overwrite files in a non-empty output directory.
    #[arg(long)]
    force: bool,

    /// Worker threads (overrides the `threads` config key).
    #[arg(long)]
    threads: Option<usize>,

    /// Only log warnings and errors.
    #[arg(long)]
    quiet: bool,

    /// Overrides the config seed.
    #[arg(long, env = "SABC_SEED", hide = true)]
    seed_override: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::new()
        .filter_level(if args.quiet { LevelFilter::Warn } else { LevelFilter::Info })
        .parse_default_env()
        .format_timestamp(None)
        .init();

    let code = match run(&args) {
        Ok(outcome) => {
            if outcome == Outcome::BudgetExhausted {
                log::warn!("simulation budget exhausted; partial results written to {}", args.out.display());
            }
            outcome.exit_code()
        }
        Err(err) => {
            eprintln!("error: {err}");
            let record = serde_json::to_string(&ErrorRecord::from(&err)).expect("error record serializes");
            eprintln!("{record}");
            // never write into a directory we were told not to touch
            if !matches!(err, CliError::OutDirExists(_)) && args.out.is_dir() {
                if let Err(e) = write_error_record(&args.out, &err) {
                    eprintln!("error: could not write error.json: {e}");
                }
            }
            err.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(args: &Args) -> Result<Outcome, CliError> {
    prepare_out_dir(&args.out, args.force)?;
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.display().to_string(),
        source,
    })?;
    let mut config = parse_config(&text, args.seed_override)?;
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(CliError::Config(vec!["--threads must be >= 1".into()]));
        }
        config.threads = Some(t);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let invocation = Invocation {
        command: args.command,
        config: &config,
        config_path: args.config.clone(),
        out_dir: args.out.clone(),
    };
    pool.install(|| invocation.execute())
}
