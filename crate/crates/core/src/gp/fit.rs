//! Multi-start maximum-marginal-likelihood fitting.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{minimize, Bounds, OptimOptions};
use super::{nlml_with_gradient, FidelityDataset, GpError, HyperLayout, MfHyperparams, MultiFidelityGp, Standardization};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Total number of optimizer starts (warm start, heuristic start, then random).
    pub n_starts: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
    /// Pin the cross-correlation instead of fitting it.
    pub fixed_rho: Option<f64>,
    /// Extra first start, e.g. the previous optimum during adaptive refinement.
    #[serde(skip)]
    pub warm_start: Option<MfHyperparams>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_starts: 8,
            max_iterations: 200,
            gradient_tolerance: 1e-5,
            seed: 0,
            fixed_rho: None,
            warm_start: None,
        }
    }
}

/// Diagnostics of one fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Objective at each start point (`None` if it could not be factorized).
    pub start_values: Vec<Option<f64>>,
    /// Objective reached from each start.
    pub final_values: Vec<Option<f64>>,
    pub best_start: usize,
    /// Accepted objective values along the winning optimizer run.
    pub best_trace: Vec<f64>,
    pub standardization: Standardization,
}

impl FitReport {
    pub fn best_value(&self) -> f64 {
        self.final_values[self.best_start].expect("best start succeeded")
    }
}

struct Problem {
    layout: HyperLayout,
    template: Vec<f64>,
    active: Vec<usize>,
    bounds: Bounds,
    heuristic: Vec<f64>,
}

impl Problem {
    fn new(z: &FidelityDataset, cfg: &FitConfig) -> Self {
        let dim = z.dim();
        let layout = HyperLayout::new(dim);
        let outputs = z.stacked_outputs();
        let n = outputs.len() as f64;
        let mean = outputs.sum() / n;
        let mut var = outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        if !(var > 1e-12) {
            var = 1.0;
        }
        let mut range = vec![1.0; dim];
        for (q, r) in range.iter_mut().enumerate() {
            let col = (0..z.len()).map(|i| z.stacked_row(i)[q]);
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if hi > lo {
                *r = hi - lo;
            }
        }
        let noise = 1e-2 * var.sqrt();

        let mut heuristic = vec![0.0; layout.len()];
        let mut lower = vec![0.0; layout.len()];
        let mut upper = vec![0.0; layout.len()];
        for var_idx in [layout.k1_var(), layout.k2_var()] {
            heuristic[var_idx] = var.ln();
            lower[var_idx] = (1e-4 * var).ln();
            upper[var_idx] = (1e4 * var).ln();
        }
        for q in 0..dim {
            for idx in [layout.k1_len(q), layout.k2_len(q)] {
                heuristic[idx] = range[q].ln();
                lower[idx] = (1e-3 * range[q]).ln();
                upper[idx] = (1e3 * range[q]).ln();
            }
        }
        heuristic[layout.rho()] = 1.0;
        lower[layout.rho()] = -5.0;
        upper[layout.rho()] = 5.0;
        for idx in [layout.noise_low(), layout.noise_high()] {
            heuristic[idx] = noise.ln();
            lower[idx] = (1e-6 * var.sqrt()).ln();
            upper[idx] = var.sqrt().ln();
        }

        let mut template = heuristic.clone();
        let mut fixed = vec![false; layout.len()];
        if z.is_single_fidelity() {
            for i in layout.low_fidelity_indices() {
                fixed[i] = true;
            }
            template[layout.rho()] = 0.0;
        }
        if let Some(rho) = cfg.fixed_rho {
            fixed[layout.rho()] = true;
            template[layout.rho()] = rho;
        }
        let active: Vec<usize> = (0..layout.len()).filter(|i| !fixed[*i]).collect();
        let bounds = Bounds {
            lower: active.iter().map(|&i| lower[i]).collect(),
            upper: active.iter().map(|&i| upper[i]).collect(),
        };
        let heuristic = active.iter().map(|&i| heuristic[i]).collect();
        Self {
            layout,
            template,
            active,
            bounds,
            heuristic,
        }
    }

    fn expand(&self, x: &[f64]) -> MfHyperparams {
        let mut full = self.template.clone();
        for (v, &i) in x.iter().zip(&self.active) {
            full[i] = *v;
        }
        self.layout.from_vector(&full)
    }

    fn reduce(&self, h: &MfHyperparams) -> Vec<f64> {
        let full = self.layout.to_vector(h);
        let mut x: Vec<f64> = self.active.iter().map(|&i| full[i]).collect();
        for (i, v) in x.iter_mut().enumerate() {
            // ln 0 for noise-free warm starts, NaN guards.
            if !v.is_finite() {
                *v = self.bounds.lower[i];
            }
        }
        self.bounds.project(&mut x);
        x
    }

    fn objective(&self, z: &FidelityDataset, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let h = self.expand(x);
        let (v, g) = nlml_with_gradient(z, &h).ok()?;
        Some((v, self.active.iter().map(|&i| g[i]).collect()))
    }

    fn random_start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let span = 100f64.ln();
        let rho_slot = self.active.iter().position(|&i| i == self.layout.rho());
        let mut x: Vec<f64> = self
            .heuristic
            .iter()
            .enumerate()
            .map(|(i, h)| {
                if Some(i) == rho_slot {
                    // Log-uniform in [1e-2, 1e2] times the unit heuristic.
                    (rng.random_range(-span..span)).exp()
                } else {
                    h + rng.random_range(-span..span)
                }
            })
            .collect();
        self.bounds.project(&mut x);
        x
    }
}

/// Fits all hyperparameters by minimising the NLML from several starts and
/// returns the conditioned model at the best optimum.
pub fn fit(data: &FidelityDataset, cfg: &FitConfig) -> Result<MultiFidelityGp, GpError> {
    fit_with_report(data, cfg).map(|(m, _)| m)
}

pub fn fit_with_report(data: &FidelityDataset, cfg: &FitConfig) -> Result<(MultiFidelityGp, FitReport), GpError> {
    if data.n_high() == 0 {
        return Err(GpError::InvalidData("fitting needs at least one high-fidelity point".into()));
    }
    if let Some(h) = &cfg.warm_start {
        if h.dim() != data.dim() {
            return Err(GpError::DimensionMismatch {
                expected: data.dim(),
                found: h.dim(),
            });
        }
    }
    let standardization = Standardization::from_dataset(data);
    let z = data.map_outputs(|y| standardization.apply(y));
    let problem = Problem::new(&z, cfg);

    let mut rng = seeding::stream_rng(cfg.seed, "gp-fit-starts");
    let mut starts = Vec::new();
    if let Some(h) = &cfg.warm_start {
        starts.push(problem.reduce(h));
    }
    starts.push(problem.heuristic.clone());
    while starts.len() < cfg.n_starts.max(1) {
        starts.push(problem.random_start(&mut rng));
    }
    starts.truncate(cfg.n_starts.max(1));

    let opts = OptimOptions {
        max_iterations: cfg.max_iterations,
        gradient_tolerance: cfg.gradient_tolerance,
        ..OptimOptions::default()
    };
    let mut start_values = Vec::with_capacity(starts.len());
    let mut final_values = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, Vec<f64>, f64, Vec<f64>)> = None;
    for (i, x0) in starts.iter().enumerate() {
        start_values.push(problem.objective(&z, x0).map(|(v, _)| v));
        let result = if problem.active.is_empty() {
            problem.objective(&z, x0).map(|(v, _)| super::optim::OptimResult {
                x: x0.clone(),
                value: v,
                iterations: 0,
                trace: vec![v],
            })
        } else {
            minimize(|x| problem.objective(&z, x), x0, &problem.bounds, &opts)
        };
        final_values.push(result.as_ref().map(|r| r.value));
        if let Some(r) = result {
            if best.as_ref().is_none_or(|b| r.value < b.2) {
                best = Some((i, r.x, r.value, r.trace));
            }
        }
    }
    let (best_start, x, _, best_trace) = best.ok_or_else(|| GpError::NumericalDegeneracy {
        n_low: data.n_low(),
        n_high: data.n_high(),
        hyper: "every multi-start candidate".into(),
    })?;
    let model = MultiFidelityGp::condition(data.clone(), problem.expand(&x), standardization)?;
    Ok((
        model,
        FitReport {
            start_values,
            final_values,
            best_start,
            best_trace,
            standardization,
        },
    ))
}

/// Independent fits, one per output channel. All channels must share their input
/// matrices. Channel `c` uses the seed `seeding::indexed(cfg.seed, "channel", c)`,
/// so the result does not depend on how channels are scheduled across threads.
pub fn fit_multioutput(datasets: &[FidelityDataset], cfg: &FitConfig) -> Result<Vec<MultiFidelityGp>, GpError> {
    let cfgs: Vec<FitConfig> = (0..datasets.len())
        .map(|c| FitConfig {
            seed: seeding::indexed(cfg.seed, "channel", c as u64),
            ..cfg.clone()
        })
        .collect();
    fit_channels(datasets, &cfgs)
}

/// Like [`fit_multioutput`] with an explicit configuration per channel.
pub(crate) fn fit_channels(datasets: &[FidelityDataset], cfgs: &[FitConfig]) -> Result<Vec<MultiFidelityGp>, GpError> {
    assert_eq!(datasets.len(), cfgs.len());
    if let Some(first) = datasets.first() {
        for (c, d) in datasets.iter().enumerate().skip(1) {
            if d.inputs_low() != first.inputs_low() || d.inputs_high() != first.inputs_high() {
                return Err(GpError::Channel {
                    channel: c,
                    source: Box::new(GpError::InvalidData("input matrices differ from channel 0".into())),
                });
            }
        }
    }
    let results: Vec<Result<MultiFidelityGp, GpError>> = datasets
        .par_iter()
        .zip(cfgs.par_iter())
        .map(|(d, cfg)| fit(d, cfg))
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(c, r)| {
            r.map_err(|e| GpError::Channel {
                channel: c,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;

    fn toy_data(n_low: usize, n_high: usize) -> FidelityDataset {
        let xl: Vec<Vec<f64>> = (0..n_low).map(|i| vec![10.0 * i as f64 / (n_low.max(2) - 1) as f64]).collect();
        let yl: Vec<f64> = xl.iter().map(|x| x[0].sin() - 0.1 * x[0] - 0.1).collect();
        let xh: Vec<Vec<f64>> = (0..n_high).map(|i| vec![0.5 + 9.0 * i as f64 / (n_high.max(2) - 1) as f64]).collect();
        let yh: Vec<f64> = xh.iter().map(|x| x[0].sin()).collect();
        FidelityDataset::from_rows(1, &xl, &yl, &xh, &yh).unwrap()
    }

    #[test]
    fn best_of_starts_dominates_every_start_point() {
        let data = toy_data(15, 4);
        let (model, report) = fit_with_report(&data, &FitConfig::default()).unwrap();
        assert_eq!(report.start_values.len(), 8);
        let best = report.best_value();
        for v in report.start_values.iter().flatten() {
            assert!(best <= *v + 1e-12);
        }
        assert!(report.best_trace.windows(2).all(|w| w[1] < w[0]));
        assert!((model.nlml() - best).abs() < 1e-6 * best.abs().max(1.0));
    }

    #[test]
    fn single_fidelity_keeps_low_level_inert() {
        let data = toy_data(0, 6);
        let model = fit(&data, &FitConfig::default()).unwrap();
        assert_eq!(model.hyper().rho, 0.0);
        let st = Standardization::from_dataset(&data);
        let z = data.map_outputs(|y| st.apply(y));
        let default_h = Problem::new(&z, &FitConfig::default()).template.clone();
        let layout = HyperLayout::new(1);
        assert_eq!(model.hyper().k1.signal_variance, default_h[layout.k1_var()].exp());
    }

    #[test]
    fn fixed_rho_is_respected() {
        let data = toy_data(10, 3);
        let cfg = FitConfig {
            fixed_rho: Some(0.0),
            n_starts: 2,
            ..Default::default()
        };
        assert_eq!(fit(&data, &cfg).unwrap().hyper().rho, 0.0);
    }

    #[test]
    fn warm_start_only() {
        let data = toy_data(10, 3);
        let warm = MfHyperparams {
            k1: KernelParams::new(1.0, vec![1.0]).unwrap(),
            k2: KernelParams::new(0.1, vec![2.0]).unwrap(),
            rho: 1.0,
            noise_low: 0.0,
            noise_high: 0.0,
        };
        let cfg = FitConfig {
            n_starts: 1,
            warm_start: Some(warm),
            ..Default::default()
        };
        let (_, report) = fit_with_report(&data, &cfg).unwrap();
        assert_eq!(report.start_values.len(), 1);
        assert!(report.start_values[0].is_some());
    }

    #[test]
    fn multioutput_rejects_misaligned_channels() {
        let a = toy_data(5, 3);
        let b = toy_data(6, 3);
        let err = fit_multioutput(&[a, b], &FitConfig::default()).unwrap_err();
        assert!(matches!(err, GpError::Channel { channel: 1, .. }));
    }

    #[test]
    fn nonfinite_outputs_never_reach_the_fitter() {
        assert!(FidelityDataset::from_rows(1, &[], &[], &[vec![0.0]], &[f64::INFINITY]).is_err());
    }
}
