use serde::{Deserialize, Serialize};

use super::GpError;

/// Squared-exponential (ARD) kernel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
}

impl KernelParams {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>) -> Result<Self, GpError> {
        let p = Self {
            signal_variance,
            length_scales,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(signal_variance: f64, length_scale: f64, dim: usize) -> Result<Self, GpError> {
        Self::new(signal_variance, vec![length_scale; dim])
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return Err(GpError::InvalidHyper(format!(
                "signal variance must be positive and finite, got {}",
                self.signal_variance
            )));
        }
        if self.length_scales.is_empty() {
            return Err(GpError::InvalidHyper("no length scales".into()));
        }
        if let Some(l) = self
            .length_scales
            .iter()
            .find(|l| !(**l > 0.0) || !l.is_finite())
        {
            return Err(GpError::InvalidHyper(format!(
                "length scales must be positive and finite, got {l}"
            )));
        }
        Ok(())
    }

    /// Kernel value without dimension checks; callers guarantee matching lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.length_scales.len());
        debug_assert_eq!(y.len(), self.length_scales.len());
        let mut r2 = 0.0;
        for ((a, b), l) in x.iter().zip(y).zip(&self.length_scales) {
            let d = (a - b) / l;
            r2 += d * d;
        }
        self.signal_variance * (-0.5 * r2).exp()
    }
}

/// `sigma^2 * exp(-0.5 * sum_n (x_n - y_n)^2 / l_n^2)`.
pub fn kernel_se(x: &[f64], y: &[f64], p: &KernelParams) -> Result<f64, GpError> {
    if x.len() != p.dim() {
        return Err(GpError::DimensionMismatch {
            expected: p.dim(),
            found: x.len(),
        });
    }
    if y.len() != p.dim() {
        return Err(GpError::DimensionMismatch {
            expected: p.dim(),
            found: y.len(),
        });
    }
    Ok(p.eval(x, y))
}
