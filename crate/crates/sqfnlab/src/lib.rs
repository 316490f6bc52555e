//! Configuration-driven experiment runner for `sqfn`.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

pub use config::{ConfigError, ExperimentConfig};
pub use experiments::{Outcome, RunError};

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    ContractFailed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::ContractFailed => 2,
        }
    }
}

/// Runs the configured experiment and writes its outputs. Relative paths in the
/// config resolve against `base`.
pub fn run(cfg: &ExperimentConfig, base: &Path) -> std::io::Result<Status> {
    let result = experiments::run(cfg, base);
    if let Err(err) = &result {
        log::error!("{err}");
    }
    let (rep, tables) = report::assemble(cfg, result);
    let dir = if cfg.output.is_absolute() { cfg.output.clone() } else { base.join(&cfg.output) };
    report::write(&dir, &rep, &tables)?;
    for c in rep.checks.iter().filter(|c| !c.passed) {
        log::warn!("check `{}` failed: {}", c.name, c.detail);
    }
    Ok(if rep.passed { Status::Passed } else { Status::ContractFailed })
}

/// Caps the global rayon pool from SQFNLAB_THREADS when set.
pub fn init_threads() -> Result<(), String> {
    match std::env::var("SQFNLAB_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("SQFNLAB_THREADS must be a positive integer, got `{v}`"))?;
            if n == 0 {
                return Err("SQFNLAB_THREADS must be positive".into());
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}
