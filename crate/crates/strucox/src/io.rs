//! Dataset files.
//!
//! A dataset is a CSV file
//!
//! ```text
//! # config_hash=<hex>,seed=<u64>,tool_version=<name version>
//! time,event,x1,...,xp
//! 0.8132,1,0.25,...
//! ```
//!
//! with `event` 0 or 1, next to a JSON sidecar (`<stem>.json`) holding the
//! envelope, covariate bounds, study end and a summary. The sidecar is
//! optional on input.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strucox_core::survival::{summarize_dataset, CovariateBounds, DatasetSummary, SurvivalDataset, SurvivalRecord};

use crate::error::{CliError, Result};
use crate::report::{write_atomic, write_json, Envelope};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub bounds: CovariateBounds,
    pub study_end: f64,
    pub summary: DatasetSummary,
}

/// Sidecar path for a dataset path.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn dataset_csv(ds: &SurvivalDataset, envelope: &Envelope) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time".to_string(), "event".to_string()];
    header.extend((1..=ds.p()).map(|j| format!("x{j}")));
    let to_err = |e: csv::Error| CliError::config(e.to_string());
    w.write_record(&header).map_err(to_err)?;
    for r in ds.records() {
        let mut row = Vec::with_capacity(2 + r.covariates.len());
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row).map_err(to_err)?;
    }
    let body = w.into_inner().map_err(|e| CliError::config(e.to_string()))?;
    let mut text = envelope.comment_line();
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(text)
}

/// Writes the CSV and its sidecar atomically.
pub fn write_dataset(path: &Path, ds: &SurvivalDataset, envelope: &Envelope) -> Result<Sidecar> {
    write_atomic(path, dataset_csv(ds, envelope)?.as_bytes())?;
    let sidecar = Sidecar {
        bounds: ds.bounds(),
        study_end: ds.study_end(),
        summary: summarize_dataset(ds),
    };
    write_json(&sidecar_path(path), envelope, &sidecar)?;
    Ok(sidecar)
}

/// Parsed dataset file.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: SurvivalDataset,
    pub envelope: Option<Envelope>,
}

/// Reads a dataset. Bounds and study end come from the sidecar when it
/// exists, otherwise from `bounds` and the data.
pub fn read_dataset(path: &Path, bounds: CovariateBounds) -> Result<LoadedDataset> {
    let input_err = |message: String| CliError::Input {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| input_err(e.to_string()))?;
    let envelope = text.lines().next().and_then(Envelope::parse_comment_line);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| input_err(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "time" || &header[1] != "event" {
        return Err(input_err("header must be `time,event,x1,...`".to_string()));
    }
    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| input_err(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| input_err(format!("row {}, column `{}`: not a number", row + 1, &header[k])))
        };
        let event = match &rec[1] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(input_err(format!("row {}: event `{other}` is not 0 or 1", row + 1))),
        };
        let covariates = (2..rec.len()).map(num).collect::<Result<Vec<f64>>>()?;
        records.push(SurvivalRecord::new(num(0)?, event, covariates));
    }
    let sidecar_file = sidecar_path(path);
    let (bounds, study_end) = if sidecar_file.exists() {
        let text = std::fs::read_to_string(&sidecar_file).map_err(|e| CliError::Input {
            path: sidecar_file.clone(),
            message: e.to_string(),
        })?;
        let side: Sidecar = serde_json::from_str(&text).map_err(|e| CliError::Input {
            path: sidecar_file.clone(),
            message: e.to_string(),
        })?;
        (side.bounds, Some(side.study_end))
    } else {
        (bounds, None)
    };
    let dataset = SurvivalDataset::new(records, bounds, study_end)?;
    Ok(LoadedDataset { dataset, envelope })
}
