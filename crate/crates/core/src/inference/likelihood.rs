use crate::gp::MultiFidelityGp;
use crate::models::Simulator;

use super::{Measurements, Prior};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian log-likelihood with per-observation variance
/// `sigma_meas^2 + extra_var`:
/// `-1/2 sum[(d_i - f_i)^2 / s_i^2 + ln(2 pi s_i^2)]`.
pub fn log_likelihood(outputs: &[f64], meas: &Measurements, extra_var: &[f64]) -> f64 {
    if outputs.len() != meas.len() || extra_var.len() != meas.len() {
        log::error!(
            "likelihood length mismatch: {} outputs, {} extra variances, {} observations",
            outputs.len(),
            extra_var.len(),
            meas.len()
        );
        return f64::NEG_INFINITY;
    }
    let mut ll = 0.0;
    for ((f, d), (sd, extra)) in outputs.iter().zip(meas.values()).zip(meas.noise_sd().iter().zip(extra_var)) {
        if !f.is_finite() || !extra.is_finite() {
            log::warn!("non-finite model output {f} (extra variance {extra}); likelihood set to -inf");
            return f64::NEG_INFINITY;
        }
        let var = sd * sd + extra.max(0.0);
        let r = d - f;
        ll -= 0.5 * (r * r / var + LN_2PI + var.ln());
    }
    ll
}

/// Unnormalized log-posterior with the simulator evaluated directly.
pub fn log_posterior_exact(m: &[f64], sim: &dyn Simulator, prior: &Prior, meas: &Measurements) -> f64 {
    let lp = prior.log_density(m);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    match sim.evaluate(m) {
        Ok(out) => lp + log_likelihood(&out, meas, &vec![0.0; meas.len()]),
        Err(e) => {
            log::warn!("simulator failed at {m:?}: {e}");
            f64::NEG_INFINITY
        }
    }
}

/// Per-channel predictive means and variances at `m`.
pub fn surrogate_predict(m: &[f64], models: &[MultiFidelityGp]) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut mean = Vec::with_capacity(models.len());
    let mut var = Vec::with_capacity(models.len());
    for g in models {
        let p = g.predict(m).ok()?;
        mean.push(p.mean);
        var.push(p.variance);
    }
    Some((mean, var))
}

/// Unnormalized log-posterior with the GP surrogate: the GP mean replaces the
/// simulator and the GP variance is added to the noise variance.
pub fn log_posterior_surrogate(m: &[f64], models: &[MultiFidelityGp], prior: &Prior, meas: &Measurements) -> f64 {
    let lp = prior.log_density(m);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    match surrogate_predict(m, models) {
        Some((mean, var)) => lp + log_likelihood(&mean, meas, &var),
        None => {
            log::warn!("surrogate prediction failed at {m:?}");
            f64::NEG_INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{FidelityDataset, KernelParams, MfHyperparams, Standardization};
    use crate::models::ToySimulator;
    use crate::ParameterSpace;

    fn meas(values: Vec<f64>, sd: f64) -> Measurements {
        let n = values.len();
        Measurements::unlabelled(values, vec![sd; n]).unwrap()
    }

    #[test]
    fn zero_residual() {
        let d = meas(vec![1.0, -2.0, 0.5], 1.0);
        let ll = log_likelihood(&[1.0, -2.0, 0.5], &d, &[0.0; 3]);
        assert!((ll + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn scalar_gaussian_and_augmentation() {
        let (r, s) = (0.7, 0.3);
        let d = meas(vec![r], s);
        let ll = log_likelihood(&[0.0], &d, &[0.0]);
        let expect = -0.5 * (r * r / (s * s) + (2.0 * std::f64::consts::PI * s * s).ln());
        assert!((ll - expect).abs() < 1e-14);
        let aug = log_likelihood(&[0.0], &d, &[3.0 * s * s]);
        let expect = -0.5 * (r * r / (4.0 * s * s) + (2.0 * std::f64::consts::PI * 4.0 * s * s).ln());
        assert!((aug - expect).abs() < 1e-14);
    }

    #[test]
    fn non_finite_output_is_minus_infinity() {
        let d = meas(vec![0.0], 1.0);
        assert_eq!(log_likelihood(&[f64::NAN], &d, &[0.0]), f64::NEG_INFINITY);
        assert_eq!(log_likelihood(&[0.0, 1.0], &d, &[0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn augmentation_direction_follows_the_residual() {
        // d/dv of -1/2 (r^2/(s^2+v) + ln(s^2+v)) has the sign of r^2 - (s^2 + v).
        let d = meas(vec![0.0], 0.1);
        let vs = [0.0, 1e-3, 1e-2, 0.1, 1.0];
        let small: Vec<f64> = vs.iter().map(|v| log_likelihood(&[0.05], &d, &[*v])).collect();
        assert!(small.windows(2).all(|w| w[1] <= w[0]));
        let large: Vec<f64> = vs[..3].iter().map(|v| log_likelihood(&[1.0], &d, &[*v])).collect();
        assert!(large.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn exact_posterior_outside_box_and_at_truth() {
        let space = ParameterSpace::from_bounds([("m", 0.0, 10.0)]).unwrap();
        let prior = Prior::uniform(space);
        let sim = ToySimulator { high: true };
        let d = meas(vec![2f64.sin()], 0.1);
        assert_eq!(log_posterior_exact(&[11.0], &sim, &prior, &d), f64::NEG_INFINITY);
        let at_truth = log_posterior_exact(&[2.0], &sim, &prior, &d);
        assert!((at_truth - log_likelihood(&[2f64.sin()], &d, &[0.0])).abs() < 1e-15);
    }

    #[test]
    fn linear_model_matches_closed_form_posterior() {
        struct Linear;
        impl Simulator for Linear {
            fn n_outputs(&self) -> usize {
                2
            }
            fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, crate::models::ModelError> {
                Ok(vec![2.0 * m[0] + 1.0, -m[0]])
            }
        }
        let prior = Prior::uniform(ParameterSpace::from_bounds([("m", -10.0, 10.0)]).unwrap());
        let d = meas(vec![3.0, -0.5], 0.5);
        // Posterior precision 1/0.25 * (4 + 1) = 20, mean = (2*(3-1) + 0.5) * 4 / 20 = 0.9.
        let f = |m: f64| log_posterior_exact(&[m], &Linear, &prior, &d);
        let g = |m: f64| -0.5 * 20.0 * (m - 0.9f64).powi(2);
        for m in [-1.0, 0.0, 0.9, 2.5] {
            assert!(((f(m) - f(0.3)) - (g(m) - g(0.3))).abs() < 1e-10);
        }
    }

    fn huge_variance_model() -> MultiFidelityGp {
        let data = FidelityDataset::from_rows(1, &[], &[], &[vec![5.0]], &[0.0]).unwrap();
        let h = MfHyperparams {
            k1: KernelParams::new(1.0, vec![1.0]).unwrap(),
            k2: KernelParams::new(1e6 * 0.01, vec![0.01]).unwrap(),
            rho: 0.0,
            noise_low: 0.0,
            noise_high: 0.0,
        };
        MultiFidelityGp::condition(data, h, Standardization::identity()).unwrap()
    }

    #[test]
    fn huge_gp_variance_flattens_the_posterior() {
        let prior = Prior::uniform(ParameterSpace::from_bounds([("m", 0.0, 10.0)]).unwrap());
        let d = meas(vec![0.3], 0.1);
        let models = vec![huge_variance_model()];
        let a = log_posterior_surrogate(&[1.0], &models, &prior, &d);
        let b = log_posterior_surrogate(&[8.0], &models, &prior, &d);
        assert!(((a - b).exp() - 1.0).abs() < 0.01);
    }

    #[test]
    fn interpolating_surrogate_at_training_point() {
        let data = FidelityDataset::from_rows(1, &[], &[], &[vec![2.0], vec![4.0]], &[0.9, -0.7]).unwrap();
        let h = MfHyperparams {
            k1: KernelParams::new(1.0, vec![1.0]).unwrap(),
            k2: KernelParams::new(1.0, vec![1.5]).unwrap(),
            rho: 0.0,
            noise_low: 0.0,
            noise_high: 0.0,
        };
        let g = MultiFidelityGp::condition(data, h, Standardization::identity()).unwrap();
        let prior = Prior::uniform(ParameterSpace::from_bounds([("m", 0.0, 10.0)]).unwrap());
        let d = meas(vec![1.0], 0.1);
        let v = log_posterior_surrogate(&[2.0], &[g], &prior, &d);
        assert!((v - log_likelihood(&[0.9], &d, &[0.0])).abs() < 1e-6);
    }
}
