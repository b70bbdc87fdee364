//! Truncated Karhunen-Loeve expansion of a stationary Gaussian log-conductivity
//! field with separable exponential covariance
//! `C(p, q) = s2 exp(-|x_p - x_q| / lx - |y_p - y_q| / ly)` over cell centres.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Grid, GridField, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSpec {
    pub variance: f64,
    pub correlation_x: f64,
    pub correlation_y: f64,
    pub mean: f64,
    pub n_terms: usize,
}

impl Default for KlSpec {
    fn default() -> Self {
        Self {
            variance: 0.4,
            correlation_x: 10.0,
            correlation_y: 5.0,
            mean: 2.0,
            n_terms: 20,
        }
    }
}

/// Leading eigenpairs of the discretized covariance.
#[derive(Debug, Clone)]
pub struct KlBasis {
    pub grid: Grid,
    pub spec: KlSpec,
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// `n_cells x n_terms`, orthonormal columns.
    pub modes: DMatrix<f64>,
    /// Sum of all eigenvalues (the covariance trace).
    pub total_variance: f64,
}

pub fn exponential_covariance(grid: &Grid, spec: &KlSpec) -> DMatrix<f64> {
    let n = grid.n_cells();
    let centres: Vec<(f64, f64)> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .map(|(i, j)| grid.center(i, j))
        .collect();
    DMatrix::from_fn(n, n, |p, q| {
        let (a, b) = (centres[p], centres[q]);
        spec.variance * (-(a.0 - b.0).abs() / spec.correlation_x - (a.1 - b.1).abs() / spec.correlation_y).exp()
    })
}

impl KlBasis {
    pub fn new(grid: Grid, spec: KlSpec) -> Result<Self, ModelError> {
        let n = grid.n_cells();
        if spec.n_terms == 0 || spec.n_terms > n {
            return Err(ModelError::InvalidSetup(format!("{} KL terms on {n} cells", spec.n_terms)));
        }
        if !(spec.variance > 0.0 && spec.correlation_x > 0.0 && spec.correlation_y > 0.0) {
            return Err(ModelError::InvalidSetup("KL variance and correlation lengths must be positive".into()));
        }
        let cov = exponential_covariance(&grid, &spec);
        let total_variance = cov.trace();
        let eig = SymmetricEigen::try_new(cov, 1e-13, 0)
            .ok_or_else(|| ModelError::Numerical("KL eigendecomposition did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let keep = &order[..spec.n_terms];
        let eigenvalues: Vec<f64> = keep.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let mut modes = DMatrix::zeros(n, spec.n_terms);
        for (c, &k) in keep.iter().enumerate() {
            let mut col = eig.eigenvectors.column(k).into_owned();
            // Fix the sign so the largest-magnitude entry is positive.
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col.neg_mut();
            }
            modes.set_column(c, &col);
        }
        Ok(Self {
            grid,
            spec,
            eigenvalues,
            modes,
            total_variance,
        })
    }

    /// Share of the field variance captured by the retained terms.
    pub fn variance_fraction(&self) -> f64 {
        self.eigenvalues.iter().sum::<f64>() / self.total_variance
    }

    /// `Y = mean + sum_i sqrt(tau_i) s_i xi_i`.
    pub fn field(&self, xi: &[f64]) -> Result<GridField, ModelError> {
        if xi.len() != self.spec.n_terms {
            return Err(ModelError::DimensionMismatch {
                expected: self.spec.n_terms,
                found: xi.len(),
            });
        }
        let mut values = vec![self.spec.mean; self.grid.n_cells()];
        for (t, (&tau, &x)) in self.eigenvalues.iter().zip(xi).enumerate() {
            let a = tau.sqrt() * x;
            if a == 0.0 {
                continue;
            }
            for (v, s) in values.iter_mut().zip(self.modes.column(t).iter()) {
                *v += a * s;
            }
        }
        GridField::new(self.grid, values)
    }

    /// Covariance of the truncated expansion between cells `p` and `q`.
    pub fn truncated_covariance(&self, p: usize, q: usize) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(t, tau)| tau * self.modes[(p, t)] * self.modes[(q, t)])
            .sum()
    }
}
