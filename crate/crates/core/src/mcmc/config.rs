use serde::{Deserialize, Serialize};

use super::McmcError;

/// Sampler settings. The defaults follow common DREAM(ZS) practice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_iterations: usize,
    /// Archive the current states every `thin_every` iterations.
    pub thin_every: usize,
    pub snooker_prob: f64,
    /// Number of archive pairs `delta` in the parallel-direction jump.
    pub n_pairs: usize,
    /// Replaces the jump rate `2.38 / sqrt(2 delta d')` and the occasional unit jump.
    pub jump_scale_override: Option<f64>,
    /// Replaces the random snooker rate `U(1.2, 2.2)`.
    pub snooker_gamma_override: Option<f64>,
    /// Probability of a unit jump rate, which lets chains hop between modes.
    pub mode_jump_prob: f64,
    /// Half-width of the multiplicative jitter `e ~ U(-b, b)`.
    pub jitter_e: f64,
    /// Standard deviation of the additive jitter `eps`.
    pub epsilon_sd: f64,
    pub crossover_probs: Vec<f64>,
    /// Fold out-of-box proposals back into the box. When off they are rejected.
    pub reflect: bool,
    /// Fraction of each chain's kept history discarded as burn-in.
    pub burn_in: f64,
    /// Keep every `sample_thin`-th state in the returned history.
    pub sample_thin: usize,
    /// Archive seed size is `max(archive_seed_factor * N_m, 2 delta + 1)`.
    pub archive_seed_factor: usize,
    /// Advance chains on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_iterations: 4000,
            thin_every: 10,
            snooker_prob: 0.1,
            n_pairs: 1,
            jump_scale_override: None,
            snooker_gamma_override: None,
            mode_jump_prob: 0.2,
            jitter_e: 0.05,
            epsilon_sd: 1e-6,
            crossover_probs: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            reflect: true,
            burn_in: 0.5,
            sample_thin: 1,
            archive_seed_factor: 10,
            parallel: true,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: String| Err(McmcError::InvalidConfig(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_chains < 3 {
            return bad(format!("n_chains = {} (need >= 3)", self.n_chains));
        }
        if self.thin_every == 0 || self.sample_thin == 0 {
            return bad("thin_every and sample_thin must be >= 1".into());
        }
        if self.n_pairs == 0 {
            return bad("n_pairs must be >= 1".into());
        }
        if !prob(self.snooker_prob) || !prob(self.mode_jump_prob) {
            return bad("snooker_prob and mode_jump_prob must lie in [0, 1]".into());
        }
        if self.crossover_probs.is_empty() || self.crossover_probs.iter().any(|p| !prob(*p)) {
            return bad("crossover_probs must be a non-empty list of probabilities".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in = {} (need [0, 1))", self.burn_in));
        }
        for (name, v) in [
            ("jump_scale_override", self.jump_scale_override),
            ("snooker_gamma_override", self.snooker_gamma_override),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("{name} must be positive"));
                }
            }
        }
        if !(self.jitter_e.is_finite() && self.jitter_e >= 0.0 && self.epsilon_sd.is_finite() && self.epsilon_sd >= 0.0) {
            return bad("jitter_e and epsilon_sd must be non-negative".into());
        }
        Ok(())
    }

    /// Number of prior draws that seed a fresh archive.
    pub fn archive_seed_rows(&self, dim: usize) -> usize {
        (self.archive_seed_factor * dim).max(2 * self.n_pairs + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SamplerConfig::default().validate().unwrap();
        assert_eq!(SamplerConfig::default().archive_seed_rows(2), 20);
    }

    #[test]
    fn rejects_two_chains_and_bad_probabilities() {
        let c = SamplerConfig {
            n_chains: 2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SamplerConfig {
            crossover_probs: vec![1.5],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn seed_rows_respect_pair_count() {
        let c = SamplerConfig {
            n_pairs: 20,
            ..Default::default()
        };
        assert_eq!(c.archive_seed_rows(1), 41);
    }
}
