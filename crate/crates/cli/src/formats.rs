//! On-disk formats.
//!
//! * Dataset: CSV with header `x1,…,xd,label,anchor1,…,anchord`.
//! * Model: JSON, matrices stored column-major, versioned by `format_version`.
//! * Report: JSON produced by `analyze`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use turnpike::training::TrainConfig;
use turnpike::turnpike::{DissipationCheck, TurnpikeReport};
use turnpike::{Activation, ClassAnchor, Dataset, EnsembleState, Layer, NetworkWeights, StageCostParams};

use crate::error::{CliError, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Reads from a file, or from standard input for `-`.
pub fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        io::read_to_string(io::stdin()).map_err(|e| CliError::io(path, e))
    } else {
        fs::read_to_string(path).map_err(|e| CliError::io(path, e))
    }
}

/// Writes to a file, or to standard output for `-`.
pub fn write_output(path: &Path, contents: &[u8]) -> Result<()> {
    if path.as_os_str() == "-" {
        let mut out = io::stdout().lock();
        out.write_all(contents)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(path, e))
    } else {
        fs::write(path, contents).map_err(|e| CliError::io(path, e))
    }
}

pub fn dataset_to_csv(data: &Dataset) -> Result<Vec<u8>> {
    let d = data.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    header.extend((1..=d).map(|i| format!("anchor{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let (x, label) = data.sample(i);
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(label.to_string());
        row.extend(data.anchors().sample(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::parse("<csv>", e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::parse("<csv>", e.to_string())
}

pub fn dataset_from_csv(text: &str, path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::parse(path, e.to_string()))?
        .clone();
    let d = header.iter().take_while(|h| h.starts_with('x')).count();
    let expected: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("label".to_string()))
        .chain((1..=d).map(|i| format!("anchor{i}")))
        .collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::parse(
            path,
            format!("expected header {:?}", expected.join(",")),
        ));
    }

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut classes: Vec<ClassAnchor> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| CliError::parse(path, e.to_string()))?;
        let num = |col: usize| -> Result<f64> {
            record[col].trim().parse::<f64>().map_err(|_| {
                CliError::parse(path, format!("line {line}, field {}: not a number", &header[col]))
            })
        };
        for c in 0..d {
            points.push(num(c)?);
        }
        let label: u32 = record[d].trim().parse().map_err(|_| {
            CliError::parse(path, format!("line {line}, field label: not an integer"))
        })?;
        let anchor = (d + 1..2 * d + 1).map(num).collect::<Result<Vec<_>>>()?;
        match classes.iter().find(|c| c.label == label) {
            Some(c) if c.anchor != anchor => {
                return Err(CliError::parse(
                    path,
                    format!("line {line}: label {label} has inconsistent anchors"),
                ))
            }
            Some(_) => {}
            None => classes.push(ClassAnchor { label, anchor }),
        }
        labels.push(label);
    }
    classes.sort_by_key(|c| c.label);
    let inputs = EnsembleState::new(d, points)?;
    Ok(Dataset::new(inputs, labels, classes)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset_from_csv(&read_input(path)?, path)
}

/// A trained network with everything needed to evaluate it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub dim: usize,
    pub depth: usize,
    pub activation: Activation,
    /// Always `"column-major"`.
    pub matrix_layout: String,
    pub layers: Vec<Layer>,
    pub classes: Vec<ClassAnchor>,
    pub config: TrainConfig,
    pub objective: f64,
    pub terminal_loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ModelFile {
    pub fn weights(&self) -> Result<NetworkWeights> {
        Ok(NetworkWeights::new(self.dim, self.layers.clone())?)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text).map_err(|e| {
            CliError::parse(path, format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(CliError::parse(
                path,
                format!("unsupported format_version {}", model.format_version),
            ));
        }
        if model.matrix_layout != "column-major" {
            return Err(CliError::parse(
                path,
                format!("field matrix_layout: unsupported {:?}", model.matrix_layout),
            ));
        }
        if model.layers.len() != model.depth {
            return Err(CliError::parse(
                path,
                format!("field depth: {} but {} layers", model.depth, model.layers.len()),
            ));
        }
        model
            .weights()
            .map_err(|e| CliError::parse(path, format!("field layers: {e}")))?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_input(path)?, path)
    }
}

/// Output of `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub format_version: u32,
    pub depth: usize,
    pub samples: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub training_pi: StageCostParams,
    pub beta: f64,
    pub rho: f64,
    pub v_hat: f64,
    /// `N̂₂(β,ρ)`.
    pub n2_beta_rho: f64,
    /// `N̂₂`.
    pub n2: f64,
    /// `N̂∞`.
    pub n_inf: f64,
    pub q_eps_count: usize,
    pub q_eps_complement: usize,
    pub terminal_loss: f64,
    pub empirical_risk: f64,
    pub stage_costs: Vec<f64>,
    pub dissipation: DissipationCheck,
    pub reports: Vec<TurnpikeReport>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}
