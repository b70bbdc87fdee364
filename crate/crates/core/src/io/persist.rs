//! JSON persistence of fitted multi-fidelity GPs.
//!
//! The file stores hyperparameters, standardization and training data; the
//! Cholesky factor is recomputed on load, which reproduces the saved model
//! bit for bit because conditioning is deterministic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::gp::{FidelityDataset, MfHyperparams, MultiFidelityGp, Standardization};

pub const GP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpRecord {
    hyper: MfHyperparams,
    standardization: Standardization,
    dim: usize,
    inputs_low: Vec<Vec<f64>>,
    outputs_low: Vec<f64>,
    inputs_high: Vec<Vec<f64>>,
    outputs_high: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpFile {
    format_version: u32,
    models: Vec<GpRecord>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn record(g: &MultiFidelityGp) -> GpRecord {
    let d = g.data();
    GpRecord {
        hyper: g.hyper().clone(),
        standardization: g.standardization(),
        dim: d.dim(),
        inputs_low: rows(d.inputs_low()),
        outputs_low: d.outputs_low().iter().copied().collect(),
        inputs_high: rows(d.inputs_high()),
        outputs_high: d.outputs_high().iter().copied().collect(),
    }
}

fn restore(r: GpRecord) -> Result<MultiFidelityGp, IoError> {
    let bad = |e: crate::gp::GpError| IoError::Parse(format!("GP file: {e}"));
    let matrix = |rows: &[Vec<f64>]| -> Result<DMatrix<f64>, IoError> {
        if rows.iter().any(|x| x.len() != r.dim) {
            return Err(IoError::Parse(format!("GP file: input rows must have {} columns", r.dim)));
        }
        Ok(DMatrix::from_fn(rows.len(), r.dim, |i, j| rows[i][j]))
    };
    let data = FidelityDataset::new(
        matrix(&r.inputs_low)?,
        DVector::from_column_slice(&r.outputs_low),
        matrix(&r.inputs_high)?,
        DVector::from_column_slice(&r.outputs_high),
    )
    .map_err(bad)?;
    r.hyper.validate().map_err(bad)?;
    MultiFidelityGp::condition(data, r.hyper, r.standardization).map_err(bad)
}

/// Serializes one model per output channel.
pub fn gp_to_json(models: &[MultiFidelityGp]) -> String {
    let file = GpFile {
        format_version: GP_FORMAT_VERSION,
        models: models.iter().map(record).collect(),
    };
    serde_json::to_string_pretty(&file).expect("plain data serializes")
}

pub fn gp_from_json(text: &str) -> Result<Vec<MultiFidelityGp>, IoError> {
    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let v: Version = serde_json::from_str(text).map_err(|e| IoError::Parse(format!("GP file: {e}")))?;
    if v.format_version != GP_FORMAT_VERSION {
        return Err(IoError::Version {
            found: v.format_version,
            expected: GP_FORMAT_VERSION,
        });
    }
    let file: GpFile = serde_json::from_str(text).map_err(|e| IoError::Parse(format!("GP file: {e}")))?;
    file.models.into_iter().map(restore).collect()
}

pub fn persist_gp(path: &std::path::Path, models: &[MultiFidelityGp]) -> Result<(), IoError> {
    super::write_file(path, &gp_to_json(models))
}

pub fn load_gp(path: &std::path::Path) -> Result<Vec<MultiFidelityGp>, IoError> {
    gp_from_json(&super::read_file(path)?)
}
