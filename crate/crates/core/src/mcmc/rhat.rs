//! Gelman-Rubin potential scale reduction factor.

use super::McmcError;

/// Chains with every `R-hat` below this value are treated as converged.
pub const RHAT_THRESHOLD: f64 = 1.2;

#[derive(Debug, Clone, PartialEq)]
pub struct RhatReport {
    /// One value per parameter, computed on the second half of each chain.
    pub per_parameter: Vec<f64>,
    /// Parameters whose chains have zero within-chain variance (`R-hat = +inf`).
    pub degenerate: Vec<bool>,
    pub converged: bool,
    /// Number of kept states per chain the report was computed from.
    pub n_kept: usize,
}

/// `R-hat` per parameter from `chains[chain][kept][parameter]`.
///
/// Uses the second half of each chain (length `n`): `W` is the mean within-chain
/// variance, `B / n` the variance of the chain means, and
/// `R = sqrt(((n - 1) / n W + (1 + 1/m) B / n) / W)`.
pub fn rhat(chains: &[Vec<Vec<f64>>]) -> Result<RhatReport, McmcError> {
    let m = chains.len();
    let kept = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m < 2 || kept < 4 || chains.iter().any(|c| c.len() != kept) {
        return Err(McmcError::TooFewSamples { chains: m, kept });
    }
    let dim = chains[0][0].len();
    let start = kept / 2;
    let n = (kept - start) as f64;
    let mut per_parameter = Vec::with_capacity(dim);
    let mut degenerate = Vec::with_capacity(dim);
    for p in 0..dim {
        let mut means = Vec::with_capacity(m);
        let mut w = 0.0;
        for c in chains {
            let xs = c[start..].iter().map(|s| s[p]);
            let mean = xs.clone().sum::<f64>() / n;
            w += xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            means.push(mean);
        }
        w /= m as f64;
        let grand = means.iter().sum::<f64>() / m as f64;
        let b_over_n = means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (m as f64 - 1.0);
        if w > 0.0 {
            let v = (n - 1.0) / n * w + (1.0 + 1.0 / m as f64) * b_over_n;
            per_parameter.push((v / w).sqrt());
            degenerate.push(false);
        } else {
            per_parameter.push(f64::INFINITY);
            degenerate.push(true);
        }
    }
    let converged = per_parameter.iter().all(|r| *r < RHAT_THRESHOLD);
    Ok(RhatReport {
        per_parameter,
        degenerate,
        converged,
        n_kept: kept,
    })
}

/// Running `R-hat` on growing prefixes of the chains, at `n_points` evenly spaced
/// lengths. Prefixes shorter than 4 states are skipped.
pub fn rhat_series(chains: &[Vec<Vec<f64>>], n_points: usize) -> Vec<RhatReport> {
    let kept = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut out: Vec<RhatReport> = Vec::new();
    for i in 1..=n_points {
        let k = kept * i / n_points;
        if k < 4 || out.last().is_some_and(|r| r.n_kept == k) {
            continue;
        }
        let prefix: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c[..k].to_vec()).collect();
        if let Ok(r) = rhat(&prefix) {
            out.push(r);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand_distr::{Distribution, Normal};

    fn draws(mean: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeding::rng(seed);
        let d = Normal::new(mean, 1.0).unwrap();
        (0..n).map(|_| vec![d.sample(&mut rng)]).collect()
    }

    #[test]
    fn identical_chains_give_at_most_one() {
        let c: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin()]).collect();
        let r = rhat(&[c.clone(), c.clone(), c]).unwrap();
        assert!(r.per_parameter[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn separated_chains_do_not_converge() {
        let r = rhat(&[draws(-10.0, 1000, 1), draws(10.0, 1000, 2)]).unwrap();
        assert!(r.per_parameter[0] > 5.0);
        assert!(!r.converged);
    }

    #[test]
    fn iid_chains_are_near_one() {
        let chains: Vec<_> = (0..4).map(|s| draws(0.0, 5000, 10 + s)).collect();
        let r = rhat(&chains).unwrap();
        // Finite-sample noise can put the estimate a hair under 1.
        assert!(r.per_parameter[0] >= 1.0 - 1e-3 && r.per_parameter[0] <= 1.05, "{:?}", r);
        assert!(r.converged);
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let c = vec![vec![1.0]; 10];
        let r = rhat(&[c.clone(), c]).unwrap();
        assert!(r.per_parameter[0].is_infinite() && r.degenerate[0]);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(rhat(&[vec![vec![0.0]; 3], vec![vec![0.0]; 3]]).is_err());
        assert!(rhat(&[vec![vec![0.0]; 10]]).is_err());
    }

    #[test]
    fn series_ends_with_the_full_report() {
        let chains: Vec<_> = (0..3).map(|s| draws(0.0, 200, s)).collect();
        let s = rhat_series(&chains, 10);
        assert_eq!(s.len(), 10);
        assert_eq!(s.last().unwrap(), &rhat(&chains).unwrap());
    }
}
