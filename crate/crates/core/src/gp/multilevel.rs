//! Recursive auto-regressive GP over `s >= 2` fidelity levels.
//!
//! Level `t` is `u_t = rho_{t-1} u_{t-1} + delta_t`, `u_0 = delta_0`. With
//! `C_0 = k_0` and `C_t = rho_{t-1}^2 C_{t-1} + k_t`, the covariance between a
//! level-`a` and a level-`b` observation (`a <= b`) is
//! `(rho_a ... rho_{b-1}) C_a(x, y)`. Fitting uses finite-difference gradients.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use super::covariance::factorize;
use super::optim::{minimize, numerical_gradient, Bounds, OptimOptions};
use super::{GpError, GpPrediction, KernelParams, Standardization};
use crate::seeding;

/// Training data per level, lowest fidelity first. Each level is `(N_t x dim, N_t)`.
#[derive(Debug, Clone)]
pub struct MultilevelDataset {
    dim: usize,
    levels: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl MultilevelDataset {
    pub fn new(levels: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Self, GpError> {
        if levels.len() < 2 {
            return Err(GpError::InvalidData("need at least two levels".into()));
        }
        let dim = levels[0].0.ncols();
        for (x, y) in &levels {
            if x.ncols() != dim {
                return Err(GpError::DimensionMismatch {
                    expected: dim,
                    found: x.ncols(),
                });
            }
            if x.nrows() != y.len() {
                return Err(GpError::InvalidData("row count differs from output count".into()));
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(GpError::InvalidData("non-finite value".into()));
            }
        }
        if levels.last().is_some_and(|(x, _)| x.nrows() == 0) {
            return Err(GpError::InvalidData("the top level needs at least one point".into()));
        }
        Ok(Self { dim, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|(x, _)| x.nrows()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn level(&self, t: usize) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.levels[t].0, &self.levels[t].1)
    }

    /// `(level, row)` of every point, stacked level by level.
    fn points(&self) -> Vec<(usize, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.len());
        for (t, (x, _)) in self.levels.iter().enumerate() {
            for i in 0..x.nrows() {
                out.push((t, x.row(i).iter().copied().collect()));
            }
        }
        out
    }

    fn stacked_outputs(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.levels.iter().flat_map(|(_, y)| y.iter().copied()))
    }
}

/// Kernels and noise per level, plus the `s - 1` scaling factors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelHyperparams {
    pub kernels: Vec<KernelParams>,
    pub rhos: Vec<f64>,
    pub noises: Vec<f64>,
}

impl MultilevelHyperparams {
    pub fn n_levels(&self) -> usize {
        self.kernels.len()
    }

    pub fn validate(&self, dim: usize) -> Result<(), GpError> {
        let s = self.kernels.len();
        if s < 2 || self.rhos.len() != s - 1 || self.noises.len() != s {
            return Err(GpError::InvalidHyper(format!(
                "{s} kernels, {} rhos, {} noises",
                self.rhos.len(),
                self.noises.len()
            )));
        }
        for k in &self.kernels {
            k.validate()?;
            if k.dim() != dim {
                return Err(GpError::DimensionMismatch {
                    expected: dim,
                    found: k.dim(),
                });
            }
        }
        if self.rhos.iter().any(|r| !r.is_finite()) || self.noises.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(GpError::InvalidHyper("rho must be finite and noise non-negative".into()));
        }
        Ok(())
    }

    /// `C_0..C_{s-1}` evaluated at `(x, y)`.
    fn recursive_cov(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = self.kernels[0].eval(x, y);
        for t in 1..self.kernels.len() {
            let r = self.rhos[t - 1];
            out[t] = r * r * out[t - 1] + self.kernels[t].eval(x, y);
        }
    }

    fn cross(&self, a: usize, b: usize, c: &[f64]) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.rhos[lo..hi].iter().product::<f64>() * c[lo]
    }

    fn top_prior_variance(&self) -> f64 {
        let mut v = self.kernels[0].signal_variance;
        for t in 1..self.kernels.len() {
            v = self.rhos[t - 1].powi(2) * v + self.kernels[t].signal_variance;
        }
        v
    }

    /// `[ln s2_t, ln l_t..]` for each level, then the rhos, then `ln noise_t`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for k in &self.kernels {
            v.push(k.signal_variance.ln());
            v.extend(k.length_scales.iter().map(|l| l.ln()));
        }
        v.extend(&self.rhos);
        v.extend(self.noises.iter().map(|n| n.ln()));
        v
    }

    pub fn from_vector(v: &[f64], levels: usize, dim: usize) -> Self {
        let mut it = v.iter().copied();
        let kernels = (0..levels)
            .map(|_| KernelParams {
                signal_variance: it.next().unwrap().exp(),
                length_scales: (0..dim).map(|_| it.next().unwrap().exp()).collect(),
            })
            .collect();
        let rhos = (0..levels - 1).map(|_| it.next().unwrap()).collect();
        let noises = (0..levels).map(|_| it.next().unwrap().exp()).collect();
        Self { kernels, rhos, noises }
    }
}

fn joint_covariance(points: &[(usize, Vec<f64>)], h: &MultilevelHyperparams) -> DMatrix<f64> {
    let n = points.len();
    let mut c = vec![0.0; h.n_levels()];
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            h.recursive_cov(&points[i].1, &points[j].1, &mut c);
            let v = h.cross(points[i].0, points[j].0, &c);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += h.noises[points[i].0].powi(2);
    }
    k
}

/// Conditioned multi-level GP predicting the top (highest-fidelity) level.
#[derive(Debug, Clone)]
pub struct MultilevelGp {
    hyper: MultilevelHyperparams,
    standardization: Standardization,
    points: Vec<(usize, Vec<f64>)>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    nlml: f64,
}

impl MultilevelGp {
    pub fn condition(
        data: &MultilevelDataset,
        hyper: MultilevelHyperparams,
        standardization: Standardization,
    ) -> Result<Self, GpError> {
        hyper.validate(data.dim())?;
        if hyper.n_levels() != data.n_levels() {
            return Err(GpError::InvalidHyper(format!(
                "{} levels of hyperparameters for {} levels of data",
                hyper.n_levels(),
                data.n_levels()
            )));
        }
        let points = data.points();
        let z = data.stacked_outputs().map(|y| standardization.apply(y));
        let k = joint_covariance(&points, &hyper);
        let (chol, _) = factorize(&k).ok_or_else(|| GpError::NumericalDegeneracy {
            n_low: data.len() - data.level(data.n_levels() - 1).1.len(),
            n_high: data.level(data.n_levels() - 1).1.len(),
            hyper: format!("{hyper:?}"),
        })?;
        let alpha = chol.solve(&z);
        let nlml = 0.5 * z.dot(&alpha)
            + chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
            + 0.5 * z.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self {
            hyper,
            standardization,
            points,
            chol,
            alpha,
            nlml,
        })
    }

    pub fn hyper(&self) -> &MultilevelHyperparams {
        &self.hyper
    }

    pub fn nlml(&self) -> f64 {
        self.nlml
    }

    pub fn predict(&self, q: &[f64]) -> Result<GpPrediction, GpError> {
        let dim = self.hyper.kernels[0].dim();
        if q.len() != dim {
            return Err(GpError::DimensionMismatch {
                expected: dim,
                found: q.len(),
            });
        }
        let top = self.hyper.n_levels() - 1;
        let mut c = vec![0.0; top + 1];
        let a = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|(t, x)| {
                self.hyper.recursive_cov(q, x, &mut c);
                self.hyper.cross(top, *t, &c)
            }),
        );
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&a)
            .expect("Cholesky factor has a positive diagonal");
        let var_z = (self.hyper.top_prior_variance() - v.norm_squared()).max(0.0);
        let s = self.standardization;
        Ok(GpPrediction {
            mean: s.invert(a.dot(&self.alpha)),
            variance: var_z * s.scale * s.scale,
        })
    }
}

/// Multi-start fit of every level's hyperparameters with finite-difference gradients.
pub fn fit_multilevel(data: &MultilevelDataset, n_starts: usize, seed: u64) -> Result<MultilevelGp, GpError> {
    let s = data.n_levels();
    let dim = data.dim();
    let y = data.stacked_outputs();
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let standardization = Standardization {
        mean,
        scale: if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 },
    };
    let points = data.points();
    let z = y.map(|v| standardization.apply(v));

    let mut range = vec![1.0; dim];
    for (q, r) in range.iter_mut().enumerate() {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, x)| (a.min(x[q]), b.max(x[q])));
        if hi > lo {
            *r = hi - lo;
        }
    }
    let heuristic = MultilevelHyperparams {
        kernels: (0..s).map(|_| KernelParams::new(1.0, range.clone()).unwrap()).collect(),
        rhos: vec![1.0; s - 1],
        noises: vec![1e-2; s],
    }
    .to_vector();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for _ in 0..s {
        lower.push(1e-4f64.ln());
        upper.push(1e4f64.ln());
        for r in &range {
            lower.push((1e-3 * r).ln());
            upper.push((1e3 * r).ln());
        }
    }
    for _ in 0..s - 1 {
        lower.push(-5.0);
        upper.push(5.0);
    }
    for _ in 0..s {
        lower.push(1e-6f64.ln());
        upper.push(0.0);
    }
    let bounds = Bounds { lower, upper };

    let objective = |x: &[f64]| -> Option<f64> {
        let h = MultilevelHyperparams::from_vector(x, s, dim);
        let k = joint_covariance(&points, &h);
        let (chol, _) = factorize(&k)?;
        let alpha = chol.solve(&z);
        let v = 0.5 * z.dot(&alpha) + chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        v.is_finite().then_some(v)
    };
    let with_grad = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let mut f = objective;
        let v = f(x)?;
        let g = numerical_gradient(&mut f, x, 1e-6)?;
        Some((v, g))
    };

    let rho_start = s * (1 + dim);
    let mut rng = seeding::stream_rng(seed, "multilevel-starts");
    let span = 100f64.ln();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..n_starts.max(1) {
        let mut x0 = heuristic.clone();
        if start > 0 {
            for (i, v) in x0.iter_mut().enumerate() {
                let u: f64 = rng.random_range(-span..span);
                *v = if (rho_start..rho_start + s - 1).contains(&i) { u.exp() } else { *v + u };
            }
            bounds.project(&mut x0);
        }
        if let Some(r) = minimize(with_grad, &x0, &bounds, &OptimOptions::default()) {
            if best.as_ref().is_none_or(|b| r.value < b.1) {
                best = Some((r.x, r.value));
            }
        }
    }
    let (x, _) = best.ok_or_else(|| GpError::NumericalDegeneracy {
        n_low: data.len() - data.level(s - 1).1.len(),
        n_high: data.level(s - 1).1.len(),
        hyper: "every multi-start candidate".into(),
    })?;
    MultilevelGp::condition(data, MultilevelHyperparams::from_vector(&x, s, dim), standardization)
}
