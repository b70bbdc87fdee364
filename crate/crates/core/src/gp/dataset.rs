use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GpError;
use crate::ParameterSpace;

/// Rows closer than this (relative to their norms, floored at 1) count as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-10;

/// Training data for one output channel: `N_L x N_m` low-fidelity inputs with their
/// outputs and `N_H x N_m` high-fidelity inputs with theirs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset", into = "RawDataset")]
pub struct FidelityDataset {
    inputs_low: DMatrix<f64>,
    outputs_low: DVector<f64>,
    inputs_high: DMatrix<f64>,
    outputs_high: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDataset {
    dim: usize,
    inputs_low: Vec<Vec<f64>>,
    outputs_low: Vec<f64>,
    inputs_high: Vec<Vec<f64>>,
    outputs_high: Vec<f64>,
}

impl TryFrom<RawDataset> for FidelityDataset {
    type Error = GpError;
    fn try_from(r: RawDataset) -> Result<Self, GpError> {
        FidelityDataset::from_rows(r.dim, &r.inputs_low, &r.outputs_low, &r.inputs_high, &r.outputs_high)
    }
}

impl From<FidelityDataset> for RawDataset {
    fn from(d: FidelityDataset) -> Self {
        RawDataset {
            dim: d.dim(),
            inputs_low: rows_of(&d.inputs_low),
            outputs_low: d.outputs_low.iter().copied().collect(),
            inputs_high: rows_of(&d.inputs_high),
            outputs_high: d.outputs_high.iter().copied().collect(),
        }
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn check_rows(m: &DMatrix<f64>, fidelity: &'static str) -> Result<(), GpError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(GpError::InvalidData(format!("nonfinite {fidelity}-fidelity input")));
    }
    let rows: Vec<Vec<f64>> = rows_of(m);
    for i in 0..rows.len() {
        for j in 0..i {
            if rows_close(&rows[i], &rows[j]) {
                return Err(GpError::DuplicateInput {
                    fidelity,
                    first: j,
                    second: i,
                });
            }
        }
    }
    Ok(())
}

/// Relative closeness test used for duplicate detection.
pub fn rows_close(a: &[f64], b: &[f64]) -> bool {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dist = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    dist <= DUPLICATE_TOLERANCE * norm(a).max(norm(b)).max(1.0)
}

impl FidelityDataset {
    pub fn new(
        inputs_low: DMatrix<f64>,
        outputs_low: DVector<f64>,
        inputs_high: DMatrix<f64>,
        outputs_high: DVector<f64>,
    ) -> Result<Self, GpError> {
        let dim = inputs_high.ncols();
        if inputs_low.ncols() != dim {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                found: inputs_low.ncols(),
            });
        }
        if dim == 0 {
            return Err(GpError::InvalidData("inputs have zero columns".into()));
        }
        if inputs_low.nrows() != outputs_low.len() {
            return Err(GpError::DimensionMismatch {
                expected: inputs_low.nrows(),
                found: outputs_low.len(),
            });
        }
        if inputs_high.nrows() != outputs_high.len() {
            return Err(GpError::DimensionMismatch {
                expected: inputs_high.nrows(),
                found: outputs_high.len(),
            });
        }
        if outputs_low.iter().chain(outputs_high.iter()).any(|y| !y.is_finite()) {
            return Err(GpError::InvalidData("nonfinite output value".into()));
        }
        check_rows(&inputs_low, "low")?;
        check_rows(&inputs_high, "high")?;
        Ok(Self {
            inputs_low,
            outputs_low,
            inputs_high,
            outputs_high,
        })
    }

    pub fn from_rows(
        dim: usize,
        inputs_low: &[Vec<f64>],
        outputs_low: &[f64],
        inputs_high: &[Vec<f64>],
        outputs_high: &[f64],
    ) -> Result<Self, GpError> {
        let to_matrix = |rows: &[Vec<f64>]| -> Result<DMatrix<f64>, GpError> {
            if let Some(r) = rows.iter().find(|r| r.len() != dim) {
                return Err(GpError::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
        };
        Self::new(
            to_matrix(inputs_low)?,
            DVector::from_column_slice(outputs_low),
            to_matrix(inputs_high)?,
            DVector::from_column_slice(outputs_high),
        )
    }

    /// High-fidelity data only (`N_L = 0`).
    pub fn single_fidelity(inputs_high: DMatrix<f64>, outputs_high: DVector<f64>) -> Result<Self, GpError> {
        let dim = inputs_high.ncols();
        Self::new(DMatrix::zeros(0, dim), DVector::zeros(0), inputs_high, outputs_high)
    }

    pub fn dim(&self) -> usize {
        self.inputs_high.ncols()
    }

    pub fn n_low(&self) -> usize {
        self.inputs_low.nrows()
    }

    pub fn n_high(&self) -> usize {
        self.inputs_high.nrows()
    }

    pub fn len(&self) -> usize {
        self.n_low() + self.n_high()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_single_fidelity(&self) -> bool {
        self.n_low() == 0
    }

    pub fn inputs_low(&self) -> &DMatrix<f64> {
        &self.inputs_low
    }

    pub fn outputs_low(&self) -> &DVector<f64> {
        &self.outputs_low
    }

    pub fn inputs_high(&self) -> &DMatrix<f64> {
        &self.inputs_high
    }

    pub fn outputs_high(&self) -> &DVector<f64> {
        &self.outputs_high
    }

    /// `D = [D_L; D_H]`.
    pub fn stacked_outputs(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.len());
        d.rows_mut(0, self.n_low()).copy_from(&self.outputs_low);
        d.rows_mut(self.n_low(), self.n_high()).copy_from(&self.outputs_high);
        d
    }

    /// Row `i` of the stacked input matrix `[M_L; M_H]`.
    pub fn stacked_row(&self, i: usize) -> Vec<f64> {
        if i < self.n_low() {
            self.inputs_low.row(i).iter().copied().collect()
        } else {
            self.inputs_high.row(i - self.n_low()).iter().copied().collect()
        }
    }

    /// Same inputs, outputs transformed by `f`.
    pub fn map_outputs(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            inputs_low: self.inputs_low.clone(),
            outputs_low: self.outputs_low.map(&f),
            inputs_high: self.inputs_high.clone(),
            outputs_high: self.outputs_high.map(&f),
        }
    }

    /// Errors if any input row lies outside `space`.
    pub fn check_within(&self, space: &ParameterSpace) -> Result<(), GpError> {
        if space.dim() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: space.dim(),
                found: self.dim(),
            });
        }
        for (name, m) in [("low", &self.inputs_low), ("high", &self.inputs_high)] {
            for i in 0..m.nrows() {
                let row: Vec<f64> = m.row(i).iter().copied().collect();
                if !space.contains(&row) {
                    return Err(GpError::InvalidData(format!(
                        "{name}-fidelity row {i} lies outside the parameter box"
                    )));
                }
            }
        }
        Ok(())
    }
}
