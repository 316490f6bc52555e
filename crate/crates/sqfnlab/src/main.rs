use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sqfnlab::ExperimentConfig;

/// Square-function experiments on sampled ADR sets.
#[derive(Parser)]
#[command(name = "sqfnlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write report.json plus CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Parse and validate the config without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = sqfnlab::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match cli.command {
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("ok: {} ({})", cfg.experiment.name(), cfg.digest());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            match sqfnlab::run(&cfg, &base) {
                Ok(status) => {
                    println!("{}: {}", cfg.experiment.name(), if status.code() == 0 { "passed" } else { "contract failed" });
                    ExitCode::from(status.code() as u8)
                }
                Err(e) => {
                    eprintln!("error writing outputs: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
