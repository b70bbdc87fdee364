//! Box-constrained limited-memory quasi-Newton minimisation.
//!
//! Projected L-BFGS with Armijo backtracking along the projected path. Every
//! accepted iterate strictly decreases the objective; the recorded trace is the
//! sequence of accepted objective values.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Stop once the infinity norm of the projected gradient step falls below this.
    pub gradient_tolerance: f64,
    /// Stop once an iteration improves the objective by less than this (relative).
    pub value_tolerance: f64,
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            value_tolerance: 1e-10,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective at the start point followed by every accepted iterate.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(g)
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|((xi, gi), (lo, hi))| ((xi - gi).clamp(*lo, *hi) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimises `f` from `x0` inside `bounds`. `f` returns `None` where the objective
/// is undefined; such points are treated as infinitely bad. Returns `None` only if
/// the (projected) start point itself is undefined.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> Option<OptimResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut g) = f(&x).filter(|(v, g)| v.is_finite() && g.iter().all(|x| x.is_finite()))?;
    let mut trace = vec![fx];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if projected_gradient_norm(&x, &g, bounds) < opts.gradient_tolerance {
            break;
        }
        iterations += 1;

        // Variables pinned at a bound with the gradient pushing outward stay fixed.
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lo = x[i] <= bounds.lower[i] && g[i] > 0.0;
                let at_hi = x[i] >= bounds.upper[i] && g[i] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(&free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };

        // Two-loop recursion on the free subspace.
        let mut q = masked(&g);
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(&masked(s), &q);
            for (qi, yi) in q.iter_mut().zip(masked(y)) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let yy = dot(y, y);
            if yy > 0.0 {
                let gamma = dot(s, y) / yy;
                q.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(&masked(y), &q);
            for (qi, si) in q.iter_mut().zip(masked(s)) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            memory.clear();
            dir = masked(&g).iter().map(|v| -v).collect();
        }
        let mut step = if memory.is_empty() {
            let dmax = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dmax > 0.0 {
                (1.0 / dmax).min(1.0)
            } else {
                1.0
            }
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            bounds.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * decrease && ft < fx {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new, s)) = accepted else {
            if memory.is_empty() {
                break;
            }
            // Retry once from steepest descent.
            memory.clear();
            continue;
        };
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > opts.memory {
                memory.pop_front();
            }
        }
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if improvement < opts.value_tolerance * fx.abs().max(1.0) {
            break;
        }
    }
    Some(OptimResult {
        x,
        value: fx,
        iterations,
        trace,
    })
}

/// Central-difference gradient for objectives without an analytic one.
pub fn numerical_gradient<F>(f: &mut F, x: &[f64], step: f64) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        p[i] = x[i] + h;
        let up = f(&p)?;
        p[i] = x[i] - h;
        let dn = f(&p)?;
        p[i] = x[i];
        g[i] = (up - dn) / (2.0 * h);
    }
    Some(g)
}
