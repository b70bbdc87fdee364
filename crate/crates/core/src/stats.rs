//! Small sample statistics used in reports and tests.

/// Percentile `q` in `[0, 100]` with linear interpolation between order
/// statistics at rank `q/100 * (n - 1)`. `sorted` must be ascending.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kde(samples: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|g| {
            norm * samples
                .iter()
                .map(|x| (-0.5 * ((g - x) / bandwidth).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}

/// Local maxima of a Gaussian KDE on a 512-point grid spanning the sample range
/// padded by three bandwidths. Maxima below `min_rel_height` times the global
/// maximum are ignored.
pub fn kde_modes(samples: &[f64], bandwidth: f64, min_rel_height: f64) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let s = sorted(samples);
    let lo = s[0] - 3.0 * bandwidth;
    let hi = s[s.len() - 1] + 3.0 * bandwidth;
    let n = 512;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let dens = kde(samples, bandwidth, &grid);
    let top = dens.iter().cloned().fold(0.0, f64::max);
    (1..n - 1)
        .filter(|&i| dens[i] > dens[i - 1] && dens[i] >= dens[i + 1] && dens[i] >= min_rel_height * top)
        .map(|i| grid[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn median_of_one_to_hundred() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_sorted(&xs, 50.0), 50.5);
        assert_eq!(percentile_sorted(&xs, 0.0), 1.0);
        assert_eq!(percentile_sorted(&xs, 100.0), 100.0);
    }

    #[test]
    fn ks_against_hand_values() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        // F_a jumps to 1/2 at 1, F_b stays 0 until 1.5.
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.5, 2.5]), 0.5);
    }

    #[test]
    fn bimodal_mixture_has_two_modes() {
        let mut rng = seeding::rng(1);
        let n = Normal::new(0.0, 0.3).unwrap();
        let xs: Vec<f64> = (0..4000)
            .map(|i| n.sample(&mut rng) + if i % 2 == 0 { 3.0 } else { 6.0 })
            .collect();
        assert_eq!(kde_modes(&xs, 0.2, 0.05).len(), 2);
        let ys: Vec<f64> = (0..4000).map(|_| n.sample(&mut rng)).collect();
        assert_eq!(kde_modes(&ys, 0.2, 0.05).len(), 1);
    }

    #[test]
    fn normal_quantile() {
        let mut rng = seeding::rng(2);
        let n = Normal::new(0.0, 1.0).unwrap();
        let xs = sorted(&(0..100_000).map(|_| n.sample(&mut rng)).collect::<Vec<_>>());
        assert!((percentile_sorted(&xs, 97.5) - 1.959964).abs() < 0.03);
    }
}
