//! The two jump kernels. Both are pure functions of the state, the archive and
//! the generator, which makes them testable in isolation.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{McmcError, SamplerConfig};
use crate::ParameterSpace;

fn check_size(archive: &[Vec<f64>], needed: usize) -> Result<(), McmcError> {
    if archive.len() < needed {
        return Err(McmcError::InsufficientArchive {
            rows: archive.len(),
            needed,
        });
    }
    Ok(())
}

fn check_dims(state: &[f64], archive: &[Vec<f64>], picks: &[usize]) -> Result<(), McmcError> {
    match picks.iter().find(|&&i| archive[i].len() != state.len()) {
        Some(&i) => Err(McmcError::DimensionMismatch {
            expected: state.len(),
            found: archive[i].len(),
        }),
        None => Ok(()),
    }
}

fn finish(mut m: Vec<f64>, space: Option<&ParameterSpace>, cfg: &SamplerConfig) -> Vec<f64> {
    if cfg.reflect {
        if let Some(s) = space {
            s.reflect(&mut m);
        }
    }
    m
}

/// Parallel-direction jump
/// `m_p = m + (1 + e) gamma sum_j (Z_aj - Z_bj) + eps` on a random crossover subspace.
///
/// When `space` is given and `cfg.reflect` is set, the proposal is folded back
/// into the box.
pub fn parallel_direction_move<R: Rng + ?Sized>(
    state: &[f64],
    archive: &[Vec<f64>],
    rng: &mut R,
    cfg: &SamplerConfig,
    space: Option<&ParameterSpace>,
) -> Result<Vec<f64>, McmcError> {
    let delta = cfg.n_pairs;
    check_size(archive, 2 * delta)?;
    let d = state.len();
    let cr = cfg.crossover_probs[rng.random_range(0..cfg.crossover_probs.len())];
    let mut selected: Vec<usize> = (0..d).filter(|_| rng.random::<f64>() < cr).collect();
    if selected.is_empty() {
        selected.push(rng.random_range(0..d));
    }
    let picks = sample(rng, archive.len(), 2 * delta).into_vec();
    check_dims(state, archive, &picks)?;
    let gamma = match cfg.jump_scale_override {
        Some(g) => g,
        None if rng.random::<f64>() < cfg.mode_jump_prob => 1.0,
        None => 2.38 / (2.0 * delta as f64 * selected.len() as f64).sqrt(),
    };
    let eps = Normal::new(0.0, cfg.epsilon_sd).expect("validated epsilon_sd");
    let mut m = state.to_vec();
    for &j in &selected {
        let diff: f64 = (0..delta).map(|k| archive[picks[2 * k]][j] - archive[picks[2 * k + 1]][j]).sum();
        let e = if cfg.jitter_e > 0.0 {
            rng.random_range(-cfg.jitter_e..cfg.jitter_e)
        } else {
            0.0
        };
        let noise = if cfg.epsilon_sd > 0.0 { eps.sample(rng) } else { 0.0 };
        m[j] += (1.0 + e) * gamma * diff + noise;
    }
    Ok(finish(m, space, cfg))
}

/// Snooker jump along the line through `state` and a random archive anchor `z`.
///
/// Returns the proposal and the log Metropolis correction
/// `(N_m - 1) ln(|m_p - z| / |m - z|)`. If the state sits on the anchor the move
/// falls back to a parallel-direction jump with zero correction.
pub fn snooker_move<R: Rng + ?Sized>(
    state: &[f64],
    archive: &[Vec<f64>],
    rng: &mut R,
    cfg: &SamplerConfig,
    space: Option<&ParameterSpace>,
) -> Result<(Vec<f64>, f64), McmcError> {
    check_size(archive, 3)?;
    let picks = sample(rng, archive.len(), 3).into_vec();
    check_dims(state, archive, &picks)?;
    let (z, za, zb) = (&archive[picks[0]], &archive[picks[1]], &archive[picks[2]]);
    let norm = state.iter().zip(z).map(|(m, z)| (m - z) * (m - z)).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return parallel_direction_move(state, archive, rng, cfg, space).map(|m| (m, 0.0));
    }
    let gamma = cfg.snooker_gamma_override.unwrap_or_else(|| rng.random_range(1.2..2.2));
    Ok(snooker_with(state, z, za, zb, gamma, cfg, space))
}

fn snooker_with(
    state: &[f64],
    z: &[f64],
    za: &[f64],
    zb: &[f64],
    gamma: f64,
    cfg: &SamplerConfig,
    space: Option<&ParameterSpace>,
) -> (Vec<f64>, f64) {
    let dir: Vec<f64> = state.iter().zip(z).map(|(m, z)| m - z).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let proj: f64 = dir.iter().zip(za.iter().zip(zb)).map(|(u, (a, b))| u / norm * (a - b)).sum();
    let m: Vec<f64> = state.iter().zip(&dir).map(|(s, u)| s + gamma * proj * u / norm).collect();
    let m = finish(m, space, cfg);
    let exponent = (state.len() - 1) as f64;
    let correction = if exponent == 0.0 {
        0.0
    } else {
        let new_norm = m.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        exponent * (new_norm.ln() - norm.ln())
    };
    (m, correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    fn exact_cfg() -> SamplerConfig {
        SamplerConfig {
            jump_scale_override: Some(1.0),
            jitter_e: 0.0,
            epsilon_sd: 0.0,
            crossover_probs: vec![1.0],
            ..Default::default()
        }
    }

    #[test]
    fn identical_archive_gives_only_epsilon_noise() {
        let archive = vec![vec![0.3, 0.7]; 10];
        let mut rng = seeding::rng(1);
        let cfg = SamplerConfig::default();
        for _ in 0..100 {
            let m = parallel_direction_move(&[1.0, 2.0], &archive, &mut rng, &cfg, None).unwrap();
            assert!((m[0] - 1.0).abs() < 1e-4 && (m[1] - 2.0).abs() < 1e-4);
        }
    }

    #[test]
    fn unit_jump_is_an_archive_difference() {
        let archive = vec![vec![0.0, 0.0], vec![1.0, 3.0]];
        let mut rng = seeding::rng(2);
        for _ in 0..20 {
            let m = parallel_direction_move(&[5.0, 5.0], &archive, &mut rng, &exact_cfg(), None).unwrap();
            let d = [m[0] - 5.0, m[1] - 5.0];
            assert!(d == [1.0, 3.0] || d == [-1.0, -3.0], "{d:?}");
        }
    }

    #[test]
    fn too_small_archive_is_an_error() {
        let mut rng = seeding::rng(3);
        let err = parallel_direction_move(&[0.0], &[vec![1.0]], &mut rng, &SamplerConfig::default(), None);
        assert!(matches!(err, Err(McmcError::InsufficientArchive { rows: 1, needed: 2 })));
        assert!(snooker_move(&[0.0], &[vec![1.0], vec![2.0]], &mut rng, &SamplerConfig::default(), None).is_err());
    }

    #[test]
    fn proposal_variance_matches_difference_of_archive_draws() {
        // Var(gamma (Z_a - Z_b)) = gamma^2 * 2 var(Z) on each updated coordinate.
        let mut rng = seeding::rng(4);
        let normal = Normal::new(0.0, 1.5).unwrap();
        let archive: Vec<Vec<f64>> = (0..4000).map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
        let n = archive.len() as f64;
        let var: Vec<f64> = (0..2)
            .map(|j| {
                let mean = archive.iter().map(|r| r[j]).sum::<f64>() / n;
                archive.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            })
            .collect();
        let cfg = SamplerConfig {
            crossover_probs: vec![1.0],
            jump_scale_override: Some(0.8),
            jitter_e: 0.0,
            ..Default::default()
        };
        let draws: Vec<Vec<f64>> = (0..100_000)
            .map(|_| parallel_direction_move(&[0.0, 0.0], &archive, &mut rng, &cfg, None).unwrap())
            .collect();
        for j in 0..2 {
            let m = draws.iter().map(|r| r[j]).sum::<f64>() / draws.len() as f64;
            let v = draws.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / draws.len() as f64;
            let predicted = 0.8 * 0.8 * 2.0 * var[j];
            assert!((v / predicted - 1.0).abs() < 0.05, "{v} vs {predicted}");
        }
    }

    #[test]
    fn snooker_with_equal_pair_stays_put() {
        let cfg = SamplerConfig::default();
        let (m, c) = snooker_with(&[3.0, -2.0], &[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 1.7, &cfg, None);
        assert_eq!(m, vec![3.0, -2.0]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn collinear_one_dimensional_snooker() {
        // m = 1, z = 0, z_a - z_b = 1, gamma = 2: projection 1, m_p = 3, no correction in 1-D.
        let cfg = SamplerConfig::default();
        let (m, c) = snooker_with(&[1.0], &[0.0], &[3.0], &[2.0], 2.0, &cfg, None);
        assert_eq!(m, vec![3.0]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn snooker_correction_in_two_dimensions() {
        // Direction (3,4)/5 from z = 0; (z_a - z_b) = (5, 0) projects to 3; gamma 2 moves 6 along it.
        let cfg = SamplerConfig::default();
        let (m, c) = snooker_with(&[3.0, 4.0], &[0.0, 0.0], &[5.0, 0.0], &[0.0, 0.0], 2.0, &cfg, None);
        assert!((m[0] - (3.0 + 6.0 * 0.6)).abs() < 1e-14 && (m[1] - (4.0 + 6.0 * 0.8)).abs() < 1e-14);
        assert!((c - (11.0f64 / 5.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn snooker_on_the_anchor_falls_back() {
        let archive = vec![vec![1.0, 1.0]; 4];
        let mut rng = seeding::rng(8);
        let (_, c) = snooker_move(&[1.0, 1.0], &archive, &mut rng, &SamplerConfig::default(), None).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn reflection_keeps_proposals_in_the_box() {
        let space = ParameterSpace::from_bounds([("a", 0.0, 1.0), ("b", -1.0, 1.0)]).unwrap();
        let archive = vec![vec![0.0, -1.0], vec![1.0, 1.0], vec![0.5, 0.0]];
        let cfg = SamplerConfig {
            jump_scale_override: Some(3.0),
            ..Default::default()
        };
        let mut rng = seeding::rng(7);
        for _ in 0..1000 {
            let m = parallel_direction_move(&[0.9, 0.9], &archive, &mut rng, &cfg, Some(&space)).unwrap();
            assert!(space.contains(&m));
            let (m, _) = snooker_move(&[0.9, 0.9], &archive, &mut rng, &cfg, Some(&space)).unwrap();
            assert!(space.contains(&m));
        }
    }
}
