use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// One self-describing CSV line. Empty optional columns mean "not
/// applicable" (e.g. no SNR for a `B` table entry, no wall time outside the
/// timing command).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    #[serde(rename = "M")]
    pub antennas: Option<usize>,
    #[serde(rename = "K")]
    pub clients: Option<usize>,
    pub snr_db: Option<f64>,
    pub receiver: String,
    pub step: Option<u64>,
    pub metric: String,
    pub value: f64,
    pub trials: u64,
    pub seed: u64,
    pub wall_time_ns: Option<u64>,
}

impl ResultRow {
    pub fn new(experiment: &str, metric: &str, value: f64, trials: u64, seed: u64) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            antennas: None,
            clients: None,
            snr_db: None,
            receiver: String::new(),
            step: None,
            metric: metric.to_string(),
            value,
            trials,
            seed,
            wall_time_ns: None,
        }
    }

    pub fn cell(mut self, antennas: usize, clients: usize, snr_db: Option<f64>) -> Self {
        self.antennas = Some(antennas);
        self.clients = Some(clients);
        self.snr_db = snr_db;
        self
    }

    pub fn receiver(mut self, receiver: &str) -> Self {
        self.receiver = receiver.to_string();
        self
    }

    pub fn step(mut self, step: u64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn wall_time(mut self, ns: u64) -> Self {
        self.wall_time_ns = Some(ns);
        self
    }
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    /// JSON summary written next to the CSV.
    pub summary: serde_json::Map<String, serde_json::Value>,
    /// Cells that did not complete, with the reason.
    pub failures: Vec<String>,
}

impl Report {
    pub fn find(&self, metric: &str, pred: impl Fn(&ResultRow) -> bool) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.metric == metric && pred(r))
    }
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        // keep the header even when nothing was produced
        w.write_record([
            "experiment", "M", "K", "snr_db", "receiver", "step", "metric", "value", "trials", "seed", "wall_time_ns",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write `<out>/<name>.csv` and `<out>/<name>.json`; returns both paths.
pub fn write_artifacts(out: &Path, name: &str, report: &Report, spec: &impl Serialize) -> Result<(PathBuf, PathBuf)> {
    let csv_path = out.join(format!("{name}.csv"));
    let json_path = out.join(format!("{name}.json"));
    write_csv(&csv_path, &report.rows)?;
    let sidecar = serde_json::json!({
        "experiment": name,
        "generator": concat!("orthofl ", env!("CARGO_PKG_VERSION")),
        "config": spec,
        "summary": report.summary,
        "failures": report.failures,
    });
    let mut text = serde_json::to_string_pretty(&sidecar)?;
    text.push('\n');
    std::fs::write(&json_path, text).with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}
