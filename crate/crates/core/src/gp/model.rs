use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::covariance::{assemble_joint_covariance, check_compatible, degeneracy, factorize, stacked_inputs};
use super::{FidelityDataset, GpError, MfHyperparams};

/// Affine output transform applied before fitting: `z = (y - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub scale: f64,
}

impl Standardization {
    pub fn identity() -> Self {
        Self { mean: 0.0, scale: 1.0 }
    }

    /// Pooled mean and population standard deviation over both fidelity levels.
    /// A (near-)constant output keeps unit scale.
    pub fn from_dataset(data: &FidelityDataset) -> Self {
        let d = data.stacked_outputs();
        if d.is_empty() {
            return Self::identity();
        }
        let n = d.len() as f64;
        let mean = d.sum() / n;
        let var = d.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd.is_finite() && sd > 1e-12 * mean.abs().max(1.0) {
            sd
        } else {
            1.0
        };
        Self { mean, scale }
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

/// Predictive distribution of the high-fidelity output at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpPrediction {
    pub mean: f64,
    pub variance: f64,
}

impl GpPrediction {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A conditioned (and usually fitted) auto-regressive multi-fidelity GP.
///
/// Immutable once built; prediction only reads the cached factor, so the model can
/// be shared across threads.
#[derive(Debug, Clone)]
pub struct MultiFidelityGp {
    hyper: MfHyperparams,
    data: FidelityDataset,
    standardization: Standardization,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    inputs: Vec<f64>,
    input_min: Vec<f64>,
    input_max: Vec<f64>,
    nlml: f64,
}

impl MultiFidelityGp {
    /// Conditions on `data` with fixed hyperparameters (given in standardized units).
    pub fn condition(
        data: FidelityDataset,
        hyper: MfHyperparams,
        standardization: Standardization,
    ) -> Result<Self, GpError> {
        check_compatible(&data, &hyper)?;
        if data.n_high() == 0 {
            return Err(GpError::InvalidData("at least one high-fidelity point is required".into()));
        }
        if !(standardization.scale > 0.0) || !standardization.mean.is_finite() {
            return Err(GpError::InvalidData(format!("bad standardization {standardization:?}")));
        }
        let z = data.map_outputs(|y| standardization.apply(y));
        let k = assemble_joint_covariance(&z, &hyper)?;
        let (chol, jitter) = factorize(&k).ok_or_else(|| degeneracy(&data, &hyper))?;
        let zd = z.stacked_outputs();
        let alpha = chol.solve(&zd);
        let n = zd.len() as f64;
        let nlml = 0.5 * zd.dot(&alpha)
            + chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
            + 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        let inputs = stacked_inputs(&data);
        let dim = data.dim();
        let mut input_min = vec![f64::INFINITY; dim];
        let mut input_max = vec![f64::NEG_INFINITY; dim];
        for row in inputs.chunks(dim) {
            for q in 0..dim {
                input_min[q] = input_min[q].min(row[q]);
                input_max[q] = input_max[q].max(row[q]);
            }
        }
        Ok(Self {
            hyper,
            data,
            standardization,
            chol,
            alpha,
            jitter,
            inputs,
            input_min,
            input_max,
            nlml,
        })
    }

    pub fn hyper(&self) -> &MfHyperparams {
        &self.hyper
    }

    pub fn data(&self) -> &FidelityDataset {
        &self.data
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Absolute diagonal jitter that made the covariance factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// NLML of the standardized data at the stored hyperparameters.
    pub fn nlml(&self) -> f64 {
        self.nlml
    }

    /// `a = [k_HL(q, M_L), k_HH(q, M_H)]` in standardized units.
    fn cross_covariance(&self, q: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let n_low = self.data.n_low();
        let h = &self.hyper;
        for (i, row) in self.inputs.chunks(d).enumerate() {
            let k1 = h.k1.eval(q, row);
            out[i] = if i < n_low {
                h.rho * k1
            } else {
                h.rho * h.rho * k1 + h.k2.eval(q, row)
            };
        }
    }

    fn check_query(&self, q: &[f64]) -> Result<(), GpError> {
        if q.len() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        Ok(())
    }

    fn finish(&self, mean_z: f64, quad: f64) -> GpPrediction {
        let mut var_z = self.hyper.high_prior_variance() - quad;
        if var_z < 0.0 {
            log::debug!("clamping negative predictive variance {var_z:e} to zero");
            var_z = 0.0;
        }
        let s = self.standardization;
        GpPrediction {
            mean: s.invert(mean_z),
            variance: var_z * s.scale * s.scale,
        }
    }

    /// Predictive mean and variance of the high-fidelity output, in original units.
    pub fn predict(&self, q: &[f64]) -> Result<GpPrediction, GpError> {
        self.check_query(q)?;
        let mut a = DVector::zeros(self.data.len());
        self.cross_covariance(q, a.as_mut_slice());
        let mean_z = a.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&a)
            .expect("Cholesky factor has a positive diagonal");
        Ok(self.finish(mean_z, v.norm_squared()))
    }

    /// Predictive mean only; skips the triangular solve.
    pub fn predict_mean(&self, q: &[f64]) -> Result<f64, GpError> {
        self.check_query(q)?;
        let mut a = DVector::zeros(self.data.len());
        self.cross_covariance(q, a.as_mut_slice());
        Ok(self.standardization.invert(a.dot(&self.alpha)))
    }

    /// Row-wise prediction for a `Q x N_m` query matrix, sharing one factorization.
    pub fn predict_batch(&self, queries: &DMatrix<f64>) -> Result<Vec<GpPrediction>, GpError> {
        if queries.nrows() == 0 {
            return Ok(Vec::new());
        }
        if queries.ncols() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                found: queries.ncols(),
            });
        }
        let n = self.data.len();
        let mut a = DMatrix::zeros(n, queries.nrows());
        let mut q = vec![0.0; self.dim()];
        for c in 0..queries.nrows() {
            for (j, v) in q.iter_mut().enumerate() {
                *v = queries[(c, j)];
            }
            self.cross_covariance(&q, a.column_mut(c).as_mut_slice());
        }
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&a)
            .expect("Cholesky factor has a positive diagonal");
        Ok((0..queries.nrows())
            .map(|c| {
                let mean_z = a.column(c).dot(&self.alpha);
                self.finish(mean_z, v.column(c).norm_squared())
            })
            .collect())
    }

    /// True if `q` falls outside the bounding box of the training inputs.
    pub fn is_extrapolation(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(self.input_min.iter().zip(&self.input_max))
            .any(|(x, (lo, hi))| x < lo || x > hi)
    }
}
