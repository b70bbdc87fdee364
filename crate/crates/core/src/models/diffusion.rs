//! Transient 1-D diffusion with a box source,
//! `u_t = kappa u_xx + s 1[a, b](x)` on `[0, 1]`, `u(0) = u(1) = 0`.
//!
//! Implicit Euler in time, central differences in space on a uniform node grid.
//! The source indicator is averaged over each node's control volume. Parameters
//! are `(ln kappa, s)`.

use serde::{Deserialize, Serialize};

use super::{ModelError, Simulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    /// Grid nodes including both boundaries.
    pub nodes: usize,
    pub dt: f64,
    pub sensors: Vec<f64>,
    pub times: Vec<f64>,
    pub source: (f64, f64),
    /// Initial condition `amplitude * sin(pi x)`.
    pub initial_amplitude: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self::high()
    }
}

impl DiffusionConfig {
    pub fn high() -> Self {
        Self {
            nodes: 101,
            dt: 1e-3,
            sensors: vec![0.25, 0.5, 0.75],
            times: vec![0.1, 0.2, 0.3],
            source: (0.35, 0.65),
            initial_amplitude: 0.0,
        }
    }

    pub fn low() -> Self {
        Self {
            nodes: 11,
            dt: 1e-2,
            ..Self::high()
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.nodes < 5 || !(self.dt > 0.0) {
            return Err(ModelError::InvalidSetup(format!("diffusion grid {} nodes, dt {}", self.nodes, self.dt)));
        }
        if self.times.is_empty() || self.times.windows(2).any(|w| w[1] <= w[0]) || self.times[0] <= 0.0 {
            return Err(ModelError::InvalidSetup("diffusion output times must be positive and increasing".into()));
        }
        if self.sensors.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(ModelError::InvalidSetup("sensors must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSimulator {
    cfg: DiffusionConfig,
}

impl DiffusionSimulator {
    pub fn new(cfg: DiffusionConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &DiffusionConfig {
        &self.cfg
    }

    /// Full nodal solution at every output time, `[time][node]`.
    pub fn solve(&self, kappa: f64, s: f64) -> Result<Vec<Vec<f64>>, ModelError> {
        if !(kappa > 0.0 && kappa.is_finite() && s.is_finite()) {
            return Err(ModelError::Simulator(format!("kappa = {kappa}, s = {s}")));
        }
        let c = &self.cfg;
        let n = c.nodes;
        let h = 1.0 / (n - 1) as f64;
        let x = |i: usize| i as f64 * h;
        let (a, b) = c.source;
        let forcing: Vec<f64> = (0..n)
            .map(|i| {
                let lo = (x(i) - 0.5 * h).max(0.0);
                let hi = (x(i) + 0.5 * h).min(1.0);
                s * ((hi.min(b) - lo.max(a)).max(0.0) / h)
            })
            .collect();
        let mut u: Vec<f64> = (0..n)
            .map(|i| c.initial_amplitude * (std::f64::consts::PI * x(i)).sin())
            .collect();
        u[0] = 0.0;
        u[n - 1] = 0.0;
        let m = n - 2;
        let mut out = Vec::with_capacity(c.times.len());
        let mut t = 0.0;
        let mut rhs = vec![0.0; m];
        let mut cp = vec![0.0; m];
        for &t_out in &c.times {
            let steps = ((t_out - t) / c.dt - 1e-9).ceil().max(1.0) as usize;
            let dt = (t_out - t) / steps as f64;
            let r = kappa * dt / (h * h);
            for _ in 0..steps {
                // Thomas algorithm for (1 + 2r) u_i - r u_{i-1} - r u_{i+1} = u_i^old + dt f_i.
                for k in 0..m {
                    rhs[k] = u[k + 1] + dt * forcing[k + 1];
                }
                let diag = 1.0 + 2.0 * r;
                cp[0] = -r / diag;
                rhs[0] /= diag;
                for k in 1..m {
                    let denom = diag + r * cp[k - 1];
                    if denom.abs() < 1e-300 {
                        return Err(ModelError::Simulator("tridiagonal solve broke down".into()));
                    }
                    cp[k] = -r / denom;
                    rhs[k] = (rhs[k] + r * rhs[k - 1]) / denom;
                }
                for k in (0..m - 1).rev() {
                    rhs[k] -= cp[k] * rhs[k + 1];
                }
                u[1..=m].copy_from_slice(&rhs);
            }
            t = t_out;
            out.push(u.clone());
        }
        Ok(out)
    }

    fn interpolate(&self, u: &[f64], xs: f64) -> f64 {
        let n = u.len();
        let f = xs * (n - 1) as f64;
        let i = (f.floor() as usize).min(n - 2);
        let w = f - i as f64;
        (1.0 - w) * u[i] + w * u[i + 1]
    }
}

impl Simulator for DiffusionSimulator {
    fn n_outputs(&self) -> usize {
        self.cfg.sensors.len() * self.cfg.times.len()
    }

    /// Outputs ordered time-major: all sensors at the first time, then the next.
    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError> {
        let &[log_kappa, s] = m else {
            return Err(ModelError::DimensionMismatch {
                expected: 2,
                found: m.len(),
            });
        };
        let sol = self.solve(log_kappa.exp(), s)?;
        let out: Vec<f64> = sol
            .iter()
            .flat_map(|u| self.cfg.sensors.iter().map(move |&xs| self.interpolate(u, xs)))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Simulator("non-finite diffusion output".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_source_zero_state() {
        for cfg in [DiffusionConfig::high(), DiffusionConfig::low()] {
            let sim = DiffusionSimulator::new(cfg).unwrap();
            assert!(sim.evaluate(&[0.0, 0.0]).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn strong_diffusion_decays() {
        let sim = DiffusionSimulator::new(DiffusionConfig {
            initial_amplitude: 1.0,
            ..DiffusionConfig::high()
        })
        .unwrap();
        // kappa T = 300 * 0.3 = 90.
        let out = sim.evaluate(&[300f64.ln(), 0.0]).unwrap();
        assert!(out[6..].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn outputs_are_time_major() {
        let sim = DiffusionSimulator::new(DiffusionConfig::high()).unwrap();
        let out = sim.evaluate(&[(0.2f64).ln(), 1.0]).unwrap();
        assert_eq!(out.len(), 9);
        // Symmetric source and domain: sensors 0.25 and 0.75 agree.
        assert!((out[0] - out[2]).abs() < 1e-12);
        assert!(out[3] > out[0]);
    }
}
