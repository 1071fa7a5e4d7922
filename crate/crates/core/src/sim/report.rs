//! Run directories: manifest, aggregate CSV, per-replication JSON and the
//! k-FWER grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::{run_experiment, ScheduleSummary, TrialReport};
use super::suite::Suite;
use crate::error::Result;

pub const MANIFEST: &str = "manifest.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPLICATIONS_JSON: &str = "replications.json";
pub const KFWER_GRID_CSV: &str = "kfwer_grid.csv";

/// Report files compared by the determinism check; the manifest holds
/// timestamps and is excluded.
pub const REPORT_FILES: [&str; 3] = [REPORT_CSV, REPLICATIONS_JSON, KFWER_GRID_CSV];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub suite: Suite,
    pub version: String,
    /// Worker threads, when pinned.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub started_unix: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
    /// Filled in once the schedules are built.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedules: Vec<ScheduleSummary>,
    pub outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default()
}

/// First 16 hex digits of the SHA-256 of the resolved suite.
pub fn suite_hash(suite: &Suite) -> Result<String> {
    let bytes = serde_json::to_vec(suite)?;
    Ok(hex::encode(Sha256::digest(&bytes))[..16].to_string())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub reports: Vec<TrialReport>,
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Runs every experiment of `suite` and writes `<out>/<hash>/`. The manifest
/// is written before any computation starts.
pub fn run_suite(suite: &Suite, out: &Path, command: &str, threads: Option<usize>) -> Result<RunOutcome> {
    let dir = out.join(suite_hash(suite)?);
    fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest {
        command: command.to_string(),
        suite: suite.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads,
        started_unix: now(),
        finished_unix: None,
        schedules: Vec::new(),
        outputs: Vec::new(),
    };
    write_manifest(&dir, &manifest)?;

    let mut reports = Vec::with_capacity(suite.experiments.len());
    for (i, cfg) in suite.experiments.iter().enumerate() {
        log::info!(
            "[{}/{}] {}",
            i + 1,
            suite.experiments.len(),
            cfg.label.as_deref().unwrap_or("")
        );
        reports.push(run_experiment(cfg)?);
    }

    write_report_csv(&dir.join(REPORT_CSV), &reports)?;
    write_kfwer_grid(&dir.join(KFWER_GRID_CSV), &reports)?;
    let mut text = serde_json::to_string_pretty(&reports)?;
    text.push('\n');
    fs::write(dir.join(REPLICATIONS_JSON), text)?;

    manifest.finished_unix = Some(now());
    manifest.schedules = reports.iter().map(|r| r.schedule.clone()).collect();
    manifest.outputs = [MANIFEST, REPORT_CSV, REPLICATIONS_JSON, KFWER_GRID_CSV]
        .iter()
        .map(|f| dir.join(f).display().to_string())
        .collect();
    write_manifest(&dir, &manifest)?;
    Ok(RunOutcome { dir, reports })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per experiment and metric.
pub fn write_report_csv(path: &Path, reports: &[TrialReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "experiment", "label", "design", "method", "n", "m", "t", "k", "alpha", "gamma", "signal",
        "schedule", "replications", "metric", "estimate", "se",
    ])
    .map_err(csv_err)?;
    for (i, r) in reports.iter().enumerate() {
        let c = &r.config;
        let design = serde_json::to_value(c.design)?;
        for (metric, est) in r.aggregates.rows() {
            w.write_record([
                i.to_string(),
                c.label.clone().unwrap_or_default(),
                design.as_str().unwrap_or_default().to_string(),
                c.method.name().to_string(),
                c.n.to_string(),
                c.m.to_string(),
                c.t.to_string(),
                opt(c.k),
                c.alpha.to_string(),
                c.gamma.to_string(),
                r.signal.to_string(),
                r.schedule.rule.clone(),
                c.replications.to_string(),
                metric.to_string(),
                est.value.to_string(),
                est.se.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `(k, t) → k-FWER` for every experiment that sets `k`.
pub fn write_kfwer_grid(path: &Path, reports: &[TrialReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["experiment", "method", "k", "t", "kfwer", "se"])
        .map_err(csv_err)?;
    for (i, r) in reports.iter().enumerate() {
        if let (Some(k), Some(est)) = (r.config.k, r.aggregates.kfwer) {
            w.write_record([
                i.to_string(),
                r.config.method.name().to_string(),
                k.to_string(),
                r.config.t.to_string(),
                est.value.to_string(),
                est.se.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::contract(format!("csv: {other:?}")),
    }
}
