//! Experiment orchestration: seeded sweeps, CSV result rows, outage and
//! covertness experiments, complexity reporting.
//!
//! Determinism contract: (config file, master seed) fixes every output byte.
//! Sweep points own derived seeds, rows are written in sweep order, and every
//! row carries the configuration hash so result files of mixed provenance can
//! be rejected at export time.

mod config;
mod experiments;

pub use config::{
    hash_bytes, AutoencSection, ChannelSection, ExperimentConfig, ExperimentKind, SweepSection,
    TrainFileConfig, MIN_STATISTICAL_BLOCKS,
};
pub use experiments::{
    complexity_report, covertness_dump, outage_curve, outage_threshold, run_sweep,
    ComplexityRow, CovertnessSummary, SweepOutput,
};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 12] = [
    "experiment",
    "channel",
    "snr_db",
    "pnr_db",
    "attack",
    "blocks",
    "errors",
    "bler",
    "bler_ci95",
    "outage_prob",
    "seed",
    "config_hash",
];

/// One line of experiment output. Optional fields print as `NA`; a missing
/// attack prints as `none`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub channel: String,
    pub snr_db: f64,
    pub pnr_db: Option<f64>,
    pub attack: Option<String>,
    pub blocks: u64,
    pub errors: u64,
    pub bler: Option<f64>,
    pub bler_ci95: Option<f64>,
    pub outage_prob: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".into(),
    }
}

impl ResultRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.channel.clone(),
            format!("{}", self.snr_db),
            opt(self.pnr_db),
            self.attack.clone().unwrap_or_else(|| "none".into()),
            format!("{}", self.blocks),
            format!("{}", self.errors),
            opt(self.bler),
            opt(self.bler_ci95),
            opt(self.outage_prob),
            format!("{}", self.seed),
            self.config_hash.clone(),
        ]
    }
}

/// Serializes rows to CSV bytes (UTF-8, header first, `\n` terminators).
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(CSV_HEADER)
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    for row in rows {
        wtr.write_record(row.record())
            .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    }
    wtr.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    fs::write(path, rows_to_csv(rows)?)?;
    Ok(())
}

/// Merges result CSVs, rejecting mixed provenance: every row of every input
/// must carry one and the same config hash.
pub fn export_merge(inputs: &[impl AsRef<Path>], output: impl AsRef<Path>) -> Result<usize> {
    let mut merged: Vec<Vec<String>> = Vec::new();
    let mut hash: Option<String> = None;
    for path in inputs {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())
            .map_err(|e| Error::InvalidConfig(format!("csv read: {e}")))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::InvalidConfig(format!("csv read: {e}")))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::InvalidConfig(format!(
                "{} is not a result file (unexpected header)",
                path.as_ref().display()
            )));
        }
        for record in rdr.records() {
            let record = record.map_err(|e| Error::InvalidConfig(format!("csv read: {e}")))?;
            let row: Vec<String> = record.iter().map(str::to_string).collect();
            let row_hash = row.last().cloned().unwrap_or_default();
            match &hash {
                None => hash = Some(row_hash),
                Some(h) if *h != row_hash => {
                    return Err(Error::InvalidConfig(format!(
                        "mixed provenance: config hash {row_hash} differs from {h}"
                    )));
                }
                _ => {}
            }
            merged.push(row);
        }
    }

    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(CSV_HEADER)
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    for row in &merged {
        wtr.write_record(row)
            .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    fs::write(output, bytes)?;
    Ok(merged.len())
}
