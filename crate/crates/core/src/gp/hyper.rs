use serde::{Deserialize, Serialize};

use super::{GpError, KernelParams};

/// Hyperparameters of the two-level auto-regressive GP.
///
/// `noise_low` and `noise_high` are standard deviations; the joint covariance adds
/// their squares on the respective diagonal blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfHyperparams {
    pub k1: KernelParams,
    pub k2: KernelParams,
    pub rho: f64,
    pub noise_low: f64,
    pub noise_high: f64,
}

impl MfHyperparams {
    pub fn validate(&self) -> Result<(), GpError> {
        self.k1.validate()?;
        self.k2.validate()?;
        if self.k1.dim() != self.k2.dim() {
            return Err(GpError::InvalidHyper(format!(
                "k1 has {} length scales but k2 has {}",
                self.k1.dim(),
                self.k2.dim()
            )));
        }
        if !self.rho.is_finite() {
            return Err(GpError::InvalidHyper(format!("rho must be finite, got {}", self.rho)));
        }
        for (name, v) in [("noise_low", self.noise_low), ("noise_high", self.noise_high)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(GpError::InvalidHyper(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.k2.dim()
    }

    /// Prior variance of the high-fidelity process at any point: `rho^2 s1^2 + s2^2`.
    pub fn high_prior_variance(&self) -> f64 {
        self.rho * self.rho * self.k1.signal_variance + self.k2.signal_variance
    }
}

/// Layout of the unconstrained optimisation vector.
///
/// `[ln s1^2, ln l1.., ln s2^2, ln l2.., rho, ln sigma_L, ln sigma_H]`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperLayout {
    pub dim: usize,
}

impl HyperLayout {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn len(&self) -> usize {
        2 * (1 + self.dim) + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn k1_var(&self) -> usize {
        0
    }

    pub fn k1_len(&self, n: usize) -> usize {
        1 + n
    }

    pub fn k2_var(&self) -> usize {
        1 + self.dim
    }

    pub fn k2_len(&self, n: usize) -> usize {
        2 + self.dim + n
    }

    pub fn rho(&self) -> usize {
        2 * (1 + self.dim)
    }

    pub fn noise_low(&self) -> usize {
        self.rho() + 1
    }

    pub fn noise_high(&self) -> usize {
        self.rho() + 2
    }

    /// Indices belonging to the low-fidelity kernel and the cross-correlation.
    pub fn low_fidelity_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..=self.dim).collect();
        v.push(self.rho());
        v.push(self.noise_low());
        v
    }

    /// Noise standard deviations of exactly zero map to `ln 0 = -inf`; callers clamp.
    pub fn to_vector(&self, h: &MfHyperparams) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(h.k1.signal_variance.ln());
        v.extend(h.k1.length_scales.iter().map(|l| l.ln()));
        v.push(h.k2.signal_variance.ln());
        v.extend(h.k2.length_scales.iter().map(|l| l.ln()));
        v.push(h.rho);
        v.push(h.noise_low.ln());
        v.push(h.noise_high.ln());
        v
    }

    pub fn from_vector(&self, v: &[f64]) -> MfHyperparams {
        debug_assert_eq!(v.len(), self.len());
        let d = self.dim;
        MfHyperparams {
            k1: KernelParams {
                signal_variance: v[0].exp(),
                length_scales: v[1..=d].iter().map(|x| x.exp()).collect(),
            },
            k2: KernelParams {
                signal_variance: v[d + 1].exp(),
                length_scales: v[d + 2..2 * d + 2].iter().map(|x| x.exp()).collect(),
            },
            rho: v[self.rho()],
            noise_low: v[self.noise_low()].exp(),
            noise_high: v[self.noise_high()].exp(),
        }
    }
}
