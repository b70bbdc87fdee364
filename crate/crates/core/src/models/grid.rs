//! Rectangular cell-centred grids and fields on them.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// `nx x ny` cells covering `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, ModelError> {
        if nx < 2 || ny < 2 || !(lx > 0.0 && ly > 0.0) {
            return Err(ModelError::InvalidSetup(format!("grid {nx}x{ny} on {lx}x{ly}")));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index with `x` varying fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }

    /// The four cells around `(x, y)` with bilinear weights (clamped at the edges).
    pub fn bilinear(&self, x: f64, y: f64) -> [(usize, f64); 4] {
        let axis = |p: f64, h: f64, n: usize| {
            let f = (p / h - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (f.floor() as usize).min(n - 2);
            (i0, f - i0 as f64)
        };
        let (i0, fx) = axis(x, self.dx(), self.nx);
        let (j0, fy) = axis(y, self.dy(), self.ny);
        [
            (self.idx(i0, j0), (1.0 - fx) * (1.0 - fy)),
            (self.idx(i0 + 1, j0), fx * (1.0 - fy)),
            (self.idx(i0, j0 + 1), (1.0 - fx) * fy),
            (self.idx(i0 + 1, j0 + 1), fx * fy),
        ]
    }

    pub fn sample(&self, values: &[f64], x: f64, y: f64) -> f64 {
        self.bilinear(x, y).iter().map(|(k, w)| w * values[*k]).sum()
    }
}

/// Cell values on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.n_cells() {
            return Err(ModelError::InvalidSetup(format!(
                "{} values for {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidSetup("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Transfers the field to `target`, whose resolution must be an integer
    /// multiple or divisor of this one along each axis. Refinement copies values
    /// piecewise-constantly; coarsening averages the covered cells arithmetically
    /// (a geometric mean when the field holds log-conductivity).
    pub fn resample(&self, target: Grid) -> Result<Self, ModelError> {
        let src = self.grid;
        let ratio = |a: usize, b: usize| -> Option<(bool, usize)> {
            if b % a == 0 {
                Some((true, b / a))
            } else if a % b == 0 {
                Some((false, a / b))
            } else {
                None
            }
        };
        let (Some((fine_x, rx)), Some((fine_y, ry))) = (ratio(src.nx, target.nx), ratio(src.ny, target.ny)) else {
            return Err(ModelError::InvalidSetup(format!(
                "cannot resample {}x{} to {}x{}",
                src.nx, src.ny, target.nx, target.ny
            )));
        };
        let mut values = vec![0.0; target.n_cells()];
        for j in 0..target.ny {
            for i in 0..target.nx {
                let xs: Vec<usize> = if fine_x { vec![i / rx] } else { (i * rx..(i + 1) * rx).collect() };
                let ys: Vec<usize> = if fine_y { vec![j / ry] } else { (j * ry..(j + 1) * ry).collect() };
                let mut sum = 0.0;
                for &y in &ys {
                    for &x in &xs {
                        sum += self.at(x, y);
                    }
                }
                values[target.idx(i, j)] = sum / (xs.len() * ys.len()) as f64;
            }
        }
        Ok(Self { grid: target, values })
    }
}
