//! Steady confined flow `div(K grad h) = 0` on a rectangle: fixed heads on the
//! left and right edges, no flow across the top and bottom.
//!
//! Cell-centred finite volumes with harmonic-mean face conductivities; boundary
//! heads act half a cell away from the adjacent centres. The SPD system is solved
//! with a banded Cholesky factorization.

use super::{Grid, GridField, ModelError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBoundary {
    pub head_left: f64,
    pub head_right: f64,
    /// Effective porosity, converting Darcy flux to pore velocity.
    pub porosity: f64,
}

impl Default for FlowBoundary {
    fn default() -> Self {
        Self {
            head_left: 12.0,
            head_right: 11.0,
            porosity: 0.25,
        }
    }
}

/// Heads at cell centres and pore velocities on cell faces.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub grid: Grid,
    pub head: Vec<f64>,
    /// `vx` on the `(nx + 1) x ny` vertical faces, index `j * (nx + 1) + i`.
    pub vx: Vec<f64>,
    /// `vy` on the `nx x (ny + 1)` horizontal faces, index `j * nx + i`.
    pub vy: Vec<f64>,
    pub porosity: f64,
}

impl FlowField {
    pub fn vx_face(&self, i: usize, j: usize) -> f64 {
        self.vx[j * (self.grid.nx + 1) + i]
    }

    pub fn vy_face(&self, i: usize, j: usize) -> f64 {
        self.vy[j * self.grid.nx + i]
    }

    /// Uniform velocity field without solving anything.
    pub fn uniform(grid: Grid, vx: f64, porosity: f64) -> Self {
        Self {
            grid,
            head: vec![0.0; grid.n_cells()],
            vx: vec![vx; (grid.nx + 1) * grid.ny],
            vy: vec![0.0; grid.nx * (grid.ny + 1)],
            porosity,
        }
    }

    /// Net volumetric outflow of pore velocity from cell `(i, j)`, per unit depth.
    pub fn divergence(&self, i: usize, j: usize) -> f64 {
        let (dx, dy) = (self.grid.dx(), self.grid.dy());
        (self.vx_face(i + 1, j) - self.vx_face(i, j)) * dy + (self.vy_face(i, j + 1) - self.vy_face(i, j)) * dx
    }
}

/// Symmetric banded matrix, lower band stored row by row: `band[i][d] = A(i, i - d)`.
struct BandMatrix {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandMatrix {
    fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(j <= i && i - j <= self.bw);
        &mut self.band[i * (self.bw + 1) + (i - j)]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[i * (self.bw + 1) + (i - j)]
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place Cholesky of the band. Returns `None` if not positive definite.
    fn cholesky(mut self) -> Option<Self> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(self.bw));
                let mut s = self.band[i * w + (i - j)];
                for k in klo..j {
                    s -= self.band[i * w + (i - k)] * self.band[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    self.band[i * w] = s.sqrt();
                } else {
                    self.band[i * w + (i - j)] = s / self.band[j * w];
                }
            }
        }
        Some(self)
    }

    fn solve_factored(&self, b: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut y = b.to_vec();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.band[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.band[i * w];
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.bw).min(self.n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.band[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.band[i * w];
        }
        y
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Solves for heads and face velocities given a conductivity field.
pub fn solve_flow(k: &GridField, bc: &FlowBoundary) -> Result<FlowField, ModelError> {
    let g = k.grid;
    if k.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(ModelError::Simulator("conductivity must be positive and finite".into()));
    }
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx(), g.dy());
    // Unknown ordering i * ny + j keeps the half-bandwidth at ny.
    let (order, bw) = if ny <= nx {
        (Box::new(move |i: usize, j: usize| i * ny + j) as Box<dyn Fn(usize, usize) -> usize>, ny)
    } else {
        (Box::new(move |i: usize, j: usize| j * nx + i) as Box<dyn Fn(usize, usize) -> usize>, nx)
    };
    let n = g.n_cells();
    let mut a = BandMatrix::new(n, bw);
    let mut rhs = vec![0.0; n];
    let tx = dy / dx;
    let ty = dx / dy;
    for j in 0..ny {
        for i in 0..nx {
            let p = order(i, j);
            let kp = k.at(i, j);
            if i + 1 < nx {
                let t = harmonic(kp, k.at(i + 1, j)) * tx;
                let e = order(i + 1, j);
                *a.at(p, p) += t;
                *a.at(e, e) += t;
                let (hi, lo) = if e > p { (e, p) } else { (p, e) };
                *a.at(hi, lo) -= t;
            }
            if j + 1 < ny {
                let t = harmonic(kp, k.at(i, j + 1)) * ty;
                let nb = order(i, j + 1);
                *a.at(p, p) += t;
                *a.at(nb, nb) += t;
                let (hi, lo) = if nb > p { (nb, p) } else { (p, nb) };
                *a.at(hi, lo) -= t;
            }
            if i == 0 {
                let t = 2.0 * kp * tx;
                *a.at(p, p) += t;
                rhs[p] += t * bc.head_left;
            }
            if i + 1 == nx {
                let t = 2.0 * kp * tx;
                *a.at(p, p) += t;
                rhs[p] += t * bc.head_right;
            }
        }
    }
    let matrix_copy = BandMatrix {
        n,
        bw,
        band: a.band.clone(),
    };
    let factor = a
        .cholesky()
        .ok_or_else(|| ModelError::Simulator("flow matrix is not positive definite".into()))?;
    let h_ordered = factor.solve_factored(&rhs);
    let resid = matrix_copy
        .mul(&h_ordered)
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    if !(resid / scale < 1e-10) {
        return Err(ModelError::Simulator(format!("flow solve residual {:e}", resid / scale)));
    }
    let mut head = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            head[g.idx(i, j)] = h_ordered[order(i, j)];
        }
    }
    let theta = bc.porosity;
    let mut vx = vec![0.0; (nx + 1) * ny];
    let mut vy = vec![0.0; nx * (ny + 1)];
    for j in 0..ny {
        for i in 0..=nx {
            let q = if i == 0 {
                -k.at(0, j) * (head[g.idx(0, j)] - bc.head_left) / (0.5 * dx)
            } else if i == nx {
                -k.at(nx - 1, j) * (bc.head_right - head[g.idx(nx - 1, j)]) / (0.5 * dx)
            } else {
                -harmonic(k.at(i - 1, j), k.at(i, j)) * (head[g.idx(i, j)] - head[g.idx(i - 1, j)]) / dx
            };
            vx[j * (nx + 1) + i] = q / theta;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let q = -harmonic(k.at(i, j - 1), k.at(i, j)) * (head[g.idx(i, j)] - head[g.idx(i, j - 1)]) / dy;
            vy[j * nx + i] = q / theta;
        }
    }
    Ok(FlowField {
        grid: g,
        head,
        vx,
        vy,
        porosity: theta,
    })
}
