//! `stackgame`: batch runs of the grid and Fisher-market solvers.

mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{Mode, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "stackgame",
    version,
    about = "Stochastic Stackelberg game and Fisher market solvers"
)]
struct Cli {
    /// TOML run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the fitted-VI stage solves (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Named preset; overrides the config.
    #[arg(long)]
    preset: Option<String>,
    /// Run mode; required without --config.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    dump_config: bool,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::new(
            cli.mode
                .ok_or_else(|| CliError::Config("pass --config or --mode".into()))?,
        ),
    };
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(name) = &cli.preset {
        cfg.preset = Some(name.clone());
    }
    cfg.resolve()
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if cli.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    for line in run::run(&cfg)? {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let text = e.to_string();
            let err = CliError::Config(
                text.lines()
                    .next()
                    .unwrap_or_default()
                    .trim_start_matches("error: ")
                    .to_string(),
            );
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
