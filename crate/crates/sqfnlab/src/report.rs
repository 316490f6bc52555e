//! report.json and CSV tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use sqfn::functionals::FunctionalReport;

use crate::config::ExperimentConfig;
use crate::experiments::{Check, Outcome, RunError};

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub config_digest: String,
    pub config: &'a ExperimentConfig,
    pub passed: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub reports: Vec<FunctionalReport<f64>>,
    pub constants: BTreeMap<String, Value>,
    pub tables: Vec<String>,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub timestamp: u64,
}

pub fn assemble<'a>(cfg: &'a ExperimentConfig, result: Result<Outcome, RunError>) -> (Report<'a>, Vec<crate::experiments::Table>) {
    let digest = cfg.digest();
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let base = Report {
        tool: "sqfnlab",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        config_digest: digest.clone(),
        config: cfg,
        passed: false,
        error: None,
        checks: Vec::new(),
        reports: Vec::new(),
        constants: BTreeMap::new(),
        tables: Vec::new(),
        timestamp,
    };
    match result {
        Ok(out) => {
            let passed = out.passed();
            let reports = out.reports.into_iter().map(|r| r.with_digest(&digest)).collect();
            let tables = out.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
            (Report { passed, checks: out.checks, reports, constants: out.constants, tables, ..base }, out.tables)
        }
        Err(err) => (Report { error: Some(err.to_string()), ..base }, Vec::new()),
    }
}

/// Writes report.json and one CSV per table into `dir`; returns the report path.
pub fn write(dir: &Path, report: &Report, tables: &[crate::experiments::Table]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", t.name)))?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
