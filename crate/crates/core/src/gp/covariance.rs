//! Joint covariance assembly and the negative log marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{FidelityDataset, GpError, HyperLayout, MfHyperparams};

/// First jitter tried, relative to the mean diagonal of the covariance.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter before giving up.
pub const JITTER_MAX: f64 = 1e-4;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) fn check_compatible(data: &FidelityDataset, h: &MfHyperparams) -> Result<(), GpError> {
    h.validate()?;
    if h.dim() != data.dim() {
        return Err(GpError::DimensionMismatch {
            expected: data.dim(),
            found: h.dim(),
        });
    }
    Ok(())
}

/// Stacked input rows `[M_L; M_H]`, row-major.
pub(crate) fn stacked_inputs(data: &FidelityDataset) -> Vec<f64> {
    let d = data.dim();
    let mut v = Vec::with_capacity(data.len() * d);
    for i in 0..data.len() {
        v.extend(data.stacked_row(i));
    }
    v
}

/// Noise-free covariance between stacked training points `i` and `j`.
#[inline]
fn latent_cov(h: &MfHyperparams, xi: &[f64], xj: &[f64], low_i: bool, low_j: bool) -> f64 {
    let k1 = h.k1.eval(xi, xj);
    match (low_i, low_j) {
        (true, true) => k1,
        (false, false) => h.rho * h.rho * k1 + h.k2.eval(xi, xj),
        _ => h.rho * k1,
    }
}

/// `[[K_LL + s_L^2 I, rho K_LH], [rho K_HL, rho^2 K1_HH + K2_HH + s_H^2 I]]` (no jitter).
pub fn assemble_joint_covariance(data: &FidelityDataset, h: &MfHyperparams) -> Result<DMatrix<f64>, GpError> {
    check_compatible(data, h)?;
    let n = data.len();
    let n_low = data.n_low();
    let d = data.dim();
    let x = stacked_inputs(data);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        for j in 0..=i {
            let xj = &x[j * d..(j + 1) * d];
            let v = latent_cov(h, xi, xj, i < n_low, j < n_low);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += if i < n_low {
            h.noise_low * h.noise_low
        } else {
            h.noise_high * h.noise_high
        };
    }
    Ok(k)
}

/// Cholesky with escalating diagonal jitter. Returns the factor and the absolute
/// jitter that was added.
pub(crate) fn factorize(k: &DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mean_diag = if n == 0 { 0.0 } else { k.diagonal().mean() };
    if !mean_diag.is_finite() {
        return None;
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * mean_diag;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            if c.l_dirty().diagonal().iter().all(|v| v.is_finite() && *v > 0.0) {
                return Some((c, jitter));
            }
        }
        rel *= 10.0;
    }
    None
}

pub(crate) fn degeneracy(data: &FidelityDataset, h: &MfHyperparams) -> GpError {
    GpError::NumericalDegeneracy {
        n_low: data.n_low(),
        n_high: data.n_high(),
        hyper: format!("{h:?}"),
    }
}

fn nlml_from_factor(chol: &Cholesky<f64, Dyn>, d: &DVector<f64>) -> (f64, DVector<f64>) {
    let alpha = chol.solve(d);
    let n = d.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    (0.5 * d.dot(&alpha) + log_det_half + 0.5 * n * LN_2PI, alpha)
}

/// `0.5 D^T K^-1 D + 0.5 ln|K| + (N/2) ln 2pi` evaluated through the Cholesky factor.
pub fn nlml(data: &FidelityDataset, h: &MfHyperparams) -> Result<f64, GpError> {
    let k = assemble_joint_covariance(data, h)?;
    let (chol, _) = factorize(&k).ok_or_else(|| degeneracy(data, h))?;
    Ok(nlml_from_factor(&chol, &data.stacked_outputs()).0)
}

/// NLML and its gradient with respect to the [`HyperLayout`] coordinates.
///
/// Uses `dNL/dt = 0.5 tr((K^-1 - a a^T) dK/dt)` with `a = K^-1 D`. The jitter is
/// treated as a constant.
pub fn nlml_with_gradient(data: &FidelityDataset, h: &MfHyperparams) -> Result<(f64, Vec<f64>), GpError> {
    let k = assemble_joint_covariance(data, h)?;
    let (chol, _) = factorize(&k).ok_or_else(|| degeneracy(data, h))?;
    let (value, alpha) = nlml_from_factor(&chol, &data.stacked_outputs());

    let n = data.len();
    let n_low = data.n_low();
    let d = data.dim();
    let layout = HyperLayout::new(d);
    let mut w = chol.inverse();
    for j in 0..n {
        for i in 0..n {
            w[(i, j)] -= alpha[i] * alpha[j];
        }
    }

    let x = stacked_inputs(data);
    let mut g = vec![0.0; layout.len()];
    let rho = h.rho;
    let inv_l1_sq: Vec<f64> = h.k1.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
    let inv_l2_sq: Vec<f64> = h.k2.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut sq = vec![0.0; d];
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        for j in 0..=i {
            let xj = &x[j * d..(j + 1) * d];
            // Off-diagonal entries appear twice in the trace.
            let wij = if i == j { 0.5 * w[(i, j)] } else { w[(i, j)] };
            for (s, (a, b)) in sq.iter_mut().zip(xi.iter().zip(xj)) {
                *s = (a - b) * (a - b);
            }
            let k1 = h.k1.eval(xi, xj);
            let (c1, dc1) = match (i < n_low, j < n_low) {
                (true, true) => (1.0, 0.0),
                (false, false) => (rho * rho, 2.0 * rho),
                _ => (rho, 1.0),
            };
            let a1 = wij * c1 * k1;
            g[layout.k1_var()] += a1;
            for q in 0..d {
                g[layout.k1_len(q)] += a1 * sq[q] * inv_l1_sq[q];
            }
            g[layout.rho()] += wij * dc1 * k1;
            if i >= n_low && j >= n_low {
                let a2 = wij * h.k2.eval(xi, xj);
                g[layout.k2_var()] += a2;
                for q in 0..d {
                    g[layout.k2_len(q)] += a2 * sq[q] * inv_l2_sq[q];
                }
            }
        }
        // d(s^2)/d(ln s) = 2 s^2, times the 0.5 in front of the trace.
        if i < n_low {
            g[layout.noise_low()] += w[(i, i)] * h.noise_low * h.noise_low;
        } else {
            g[layout.noise_high()] += w[(i, i)] * h.noise_high * h.noise_high;
        }
    }
    Ok((value, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;
    use proptest::prelude::*;

    fn hyper(rho: f64, nl: f64, nh: f64) -> MfHyperparams {
        MfHyperparams {
            k1: KernelParams::new(1.3, vec![0.8, 1.7]).unwrap(),
            k2: KernelParams::new(0.4, vec![0.5, 2.2]).unwrap(),
            rho,
            noise_low: nl,
            noise_high: nh,
        }
    }

    fn small_dataset() -> FidelityDataset {
        FidelityDataset::from_rows(
            2,
            &[vec![0.1, 0.2], vec![0.9, -0.4]],
            &[0.3, -1.2],
            &[vec![0.4, 0.0]],
            &[0.8],
        )
        .unwrap()
    }

    #[test]
    fn rho_zero_decouples_fidelities() {
        let data = FidelityDataset::from_rows(2, &[vec![0.0, 0.0]], &[1.0], &[vec![0.3, 0.1]], &[2.0]).unwrap();
        let k = assemble_joint_covariance(&data, &hyper(0.0, 0.1, 0.1)).unwrap();
        assert_eq!(k[(0, 1)], 0.0);
        assert_eq!(k[(1, 0)], 0.0);
    }

    #[test]
    fn single_high_point_with_unit_rho() {
        let data = FidelityDataset::from_rows(2, &[], &[], &[vec![0.3, 0.1]], &[2.0]).unwrap();
        let k = assemble_joint_covariance(&data, &hyper(1.0, 0.0, 0.0)).unwrap();
        assert!((k[(0, 0)] - (1.3 + 0.4)).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_matches_formula_oracle() {
        let data = small_dataset();
        let h = hyper(0.7, 0.05, 0.02);
        let k = assemble_joint_covariance(&data, &h).unwrap();
        // Entry-by-entry from the SE formula, written out independently.
        let se = |s2: f64, l: [f64; 2], a: [f64; 2], b: [f64; 2]| {
            s2 * (-0.5 * (((a[0] - b[0]) / l[0]).powi(2) + ((a[1] - b[1]) / l[1]).powi(2))).exp()
        };
        let pts = [[0.1, 0.2], [0.9, -0.4], [0.4, 0.0]];
        let k1 = |a, b| se(1.3, [0.8, 1.7], a, b);
        let k2 = |a, b| se(0.4, [0.5, 2.2], a, b);
        let expected = [
            [k1(pts[0], pts[0]) + 0.05f64.powi(2), k1(pts[0], pts[1]), 0.7 * k1(pts[0], pts[2])],
            [k1(pts[1], pts[0]), k1(pts[1], pts[1]) + 0.05f64.powi(2), 0.7 * k1(pts[1], pts[2])],
            [
                0.7 * k1(pts[2], pts[0]),
                0.7 * k1(pts[2], pts[1]),
                0.49 * k1(pts[2], pts[2]) + k2(pts[2], pts[2]) + 0.02f64.powi(2),
            ],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[(i, j)] - expected[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn one_point_nlml_is_scalar_gaussian() {
        let h = hyper(0.9, 0.0, 0.3);
        let data = FidelityDataset::from_rows(2, &[], &[], &[vec![0.2, 0.2]], &[1.7]).unwrap();
        let v: f64 = 0.81 * 1.3 + 0.4 + 0.09;
        let expected = 0.5 * 1.7 * 1.7 / v + 0.5 * v.ln() + 0.5 * LN_2PI;
        let got = nlml(&data, &h).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn zero_outputs_leave_only_the_determinant() {
        let data = small_dataset().map_outputs(|_| 0.0);
        let h = hyper(0.7, 0.05, 0.02);
        let k = assemble_joint_covariance(&data, &h).unwrap();
        let expected = 0.5 * k.determinant().ln() + 1.5 * LN_2PI;
        let got = nlml(&data, &h).unwrap();
        assert!((got - expected).abs() < 1e-8 * expected.abs());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = FidelityDataset::from_rows(
            2,
            &[vec![0.1, 0.2], vec![0.9, -0.4], vec![-0.6, 0.5], vec![0.3, 0.9]],
            &[0.3, -1.2, 0.4, 0.1],
            &[vec![0.4, 0.0], vec![-0.2, 0.7]],
            &[0.8, 0.2],
        )
        .unwrap();
        let h = hyper(0.7, 0.05, 0.08);
        let layout = HyperLayout::new(2);
        let theta = layout.to_vector(&h);
        let (_, g) = nlml_with_gradient(&data, &h).unwrap();
        for p in 0..layout.len() {
            let step = 1e-6;
            let mut up = theta.clone();
            up[p] += step;
            let mut dn = theta.clone();
            dn[p] -= step;
            let fd = (nlml(&data, &layout.from_vector(&up)).unwrap()
                - nlml(&data, &layout.from_vector(&dn)).unwrap())
                / (2.0 * step);
            let tol = 1e-4 * fd.abs().max(1e-3);
            assert!((fd - g[p]).abs() < tol, "param {p}: fd {fd} vs analytic {}", g[p]);
        }
    }

    #[test]
    fn degenerate_covariance_is_reported() {
        // Zero noise, identical low/high kernels and a huge length scale: near rank one.
        let data = FidelityDataset::from_rows(
            1,
            &[],
            &[],
            &[vec![0.0], vec![1e-3], vec![2e-3], vec![3e-3]],
            &[0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let h = MfHyperparams {
            k1: KernelParams::new(1.0, vec![1e6]).unwrap(),
            k2: KernelParams::new(1.0, vec![1e6]).unwrap(),
            rho: 0.0,
            noise_low: 0.0,
            noise_high: 0.0,
        };
        // Maximal jitter rescues this; the objective is still finite.
        assert!(nlml(&data, &h).unwrap().is_finite());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(factorize(&indefinite).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn factorizes_after_jitter_and_high_block_is_eq5(
            n_low in 0usize..25,
            n_high in 1usize..25,
            seed in any::<u64>(),
            s1 in 0.05f64..5.0, s2 in 0.05f64..5.0,
            l1 in 0.05f64..3.0, l2 in 0.05f64..3.0,
            rho in -3.0f64..3.0,
        ) {
            use rand::Rng;
            let mut rng = crate::seeding::rng(seed);
            let mut row = || vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let low: Vec<Vec<f64>> = (0..n_low).map(|_| row()).collect();
            let high: Vec<Vec<f64>> = (0..n_high).map(|_| row()).collect();
            let data = FidelityDataset::from_rows(2, &low, &vec![0.0; n_low], &high, &vec![0.0; n_high]).unwrap();
            let h = MfHyperparams {
                k1: KernelParams::new(s1, vec![l1, 2.0 * l1]).unwrap(),
                k2: KernelParams::new(s2, vec![l2, 0.5 * l2]).unwrap(),
                rho,
                noise_low: 0.0,
                noise_high: 0.0,
            };
            let k = assemble_joint_covariance(&data, &h).unwrap();
            prop_assert_eq!(&k, &k.transpose());
            for i in 0..n_high {
                for j in 0..n_high {
                    let (a, b) = (&high[i], &high[j]);
                    let direct = rho * rho * h.k1.eval(a, b) + h.k2.eval(a, b);
                    prop_assert!((k[(n_low + i, n_low + j)] - direct).abs() < 1e-12);
                }
            }
            let (chol, jitter) = factorize(&k).expect("jitter must rescue a PSD matrix");
            let mut kj = k.clone();
            for i in 0..kj.nrows() { kj[(i, i)] += jitter; }
            let eig = nalgebra::SymmetricEigen::new(kj);
            let scale = k.diagonal().mean();
            prop_assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12 * scale));
            prop_assert!(chol.l().diagonal().iter().all(|&v| v > 0.0));
        }
    }
}
