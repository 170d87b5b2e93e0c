//! `ambc`: run Monte-Carlo sweeps and bound curves from a TOML configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use ambc_core::harness::write_csv;
use ambc_core::{bound_curve, export_results, run_sweep, Error, ExperimentConfig, SweepKind};
use clap::{Parser, Subcommand};

/// Thread count override, taking precedence over the configuration file.
const THREADS_ENV: &str = "AMBC_THREADS";

#[derive(Parser)]
#[command(name = "ambc", version, about = "Semi-blind channel estimation simulator for ambient backscatter links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write `<sweep>.csv` and `<sweep>.json` into the output directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// One of pt, data, iters, tags.
        #[arg(long)]
        sweep: SweepKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write pilot-only and semi-blind bounds over the transmit-power grid as CSV.
    Crb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn env_threads() -> Result<Option<usize>, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            sweep,
            out,
            trials,
            seed,
            threads,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let trials = trials.unwrap_or(cfg.run.trials);
            let seed = seed.unwrap_or(cfg.system.seed);
            let threads = match env_threads()? {
                Some(t) => t,
                None => threads.unwrap_or(cfg.run.threads),
            };
            let grid = sweep.grid(&cfg);
            log::info!("{sweep} sweep: {} points x {trials} trials, seed {seed}", grid.len());
            let result = run_sweep(&cfg, sweep, &grid, trials, seed, threads)?;
            let paths = export_results(&result, &out)?;
            println!("{}", paths.csv.display());
            println!("{}", paths.json.display());
        }
        Command::Crb { config, out, seed } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = bound_curve(&cfg, seed.unwrap_or(cfg.system.seed))?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Format {
                    path: dir.to_path_buf(),
                    message: e.to_string(),
                })?;
            }
            write_csv(&out, &rows)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

/// Numerical failures exit with 3; everything the user can fix in the inputs
/// (configuration, files, arguments) exits with 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::SingularFisher { .. } | Error::Domain(_) | Error::Dimension(_) => 3,
        Error::Trial { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
