//! Built-in high/low-fidelity simulator pairs and the problems wired from them.
//!
//! | problem       | parameters                          | low fidelity            |
//! |---------------|-------------------------------------|-------------------------|
//! | `toy1d`       | `m` in `[0, 10]`                    | `sin m - 0.1 m - 0.1`   |
//! | `diffusion1d` | `(ln kappa, s)`                     | 11 nodes, `dt = 1e-2`   |
//! | `plume5`      | `(x_s, y_s, S_s, t_on, t_off)`      | 20 x 10 cells           |
//! | `plume28`     | 8 source parameters + 20 KL terms   | 20 x 10 cells           |

mod darcy;
mod diffusion;
mod grid;
mod kl;
mod plume;
mod toy;
mod transport;

use std::sync::Arc;

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use darcy::{solve_flow, FlowBoundary, FlowField};
pub use diffusion::{DiffusionConfig, DiffusionSimulator};
pub use grid::{Grid, GridField};
pub use kl::{exponential_covariance, KlBasis, KlSpec};
pub use plume::{PlumeKlSimulator, PlumeSimulator, DOMAIN, KL_SOURCE_PARAMS};
pub use toy::{toy_high, toy_low, ToySimulator};
pub use transport::{simulate, Dispersivity, MassBalance, SourceSpec, TransportResult};

use crate::inference::{Measurements, Prior};
use crate::{seeding, ParameterSpace};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown problem `{0}` (expected toy1d, diffusion1d, plume5 or plume28)")]
    UnknownProblem(String),
    #[error("invalid model setup: {0}")]
    InvalidSetup(String),
    #[error("simulator failure: {0}")]
    Simulator(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A deterministic forward map from parameters to `N_d` outputs.
pub trait Simulator: Send + Sync {
    fn n_outputs(&self) -> usize;
    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError>;
}

impl<S: Simulator + ?Sized> Simulator for Arc<S> {
    fn n_outputs(&self) -> usize {
        (**self).n_outputs()
    }

    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError> {
        (**self).evaluate(m)
    }
}

/// High- and low-fidelity simulators over one parameter space and one output layout.
#[derive(Clone)]
pub struct ForwardModelPair {
    pub space: ParameterSpace,
    pub labels: Vec<String>,
    pub high: Arc<dyn Simulator>,
    pub low: Arc<dyn Simulator>,
    /// Nominal cost of one high-fidelity run in low-fidelity runs (metadata only).
    pub cost_ratio: f64,
}

impl std::fmt::Debug for ForwardModelPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardModelPair")
            .field("space", &self.space)
            .field("labels", &self.labels)
            .field("cost_ratio", &self.cost_ratio)
            .finish_non_exhaustive()
    }
}

impl ForwardModelPair {
    pub fn new(
        space: ParameterSpace,
        labels: Vec<String>,
        high: Arc<dyn Simulator>,
        low: Arc<dyn Simulator>,
        cost_ratio: f64,
    ) -> Result<Self, ModelError> {
        if high.n_outputs() != labels.len() || low.n_outputs() != labels.len() {
            return Err(ModelError::InvalidSetup(format!(
                "output counts differ: {} labels, high {}, low {}",
                labels.len(),
                high.n_outputs(),
                low.n_outputs()
            )));
        }
        Ok(Self {
            space,
            labels,
            high,
            low,
            cost_ratio,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.labels.len()
    }
}

/// Optional changes to a named problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOverrides {
    /// Measurement noise standard deviation applied to every channel.
    pub noise_sd: Option<f64>,
    pub truth: Option<Vec<f64>>,
    /// High-fidelity resolution: `[nodes]` for diffusion1d, `[nx, ny]` for plumes.
    pub high_resolution: Option<Vec<usize>>,
    pub low_resolution: Option<Vec<usize>>,
    /// Observation wells for the plume problems.
    pub wells: Option<Vec<[f64; 2]>>,
    /// Observation times (diffusion and plume problems).
    pub times: Option<Vec<f64>>,
}

/// A named inverse problem: simulator pair, prior, true parameters and noise.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub pair: ForwardModelPair,
    pub prior: Prior,
    pub truth: Vec<f64>,
    pub noise_sd: Vec<f64>,
}

impl Problem {
    pub fn space(&self) -> &ParameterSpace {
        &self.pair.space
    }

    /// `f_H(truth)` plus seeded Gaussian noise from the `noise` sub-stream.
    pub fn synthetic_measurements(&self, seed: u64) -> Result<Measurements, ModelError> {
        let clean = self.pair.high.evaluate(&self.truth)?;
        let mut rng = seeding::stream_rng(seed, "noise");
        let values = clean
            .iter()
            .zip(&self.noise_sd)
            .map(|(v, sd)| v + sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        Measurements::new(values, self.noise_sd.clone(), self.pair.labels.clone())
            .map_err(|e| ModelError::InvalidSetup(e.to_string()))
    }
}

fn resolution(o: &Option<Vec<usize>>, default: &[usize]) -> Result<Vec<usize>, ModelError> {
    match o {
        None => Ok(default.to_vec()),
        Some(v) if v.len() == default.len() => Ok(v.clone()),
        Some(v) => Err(ModelError::InvalidSetup(format!("resolution {v:?} needs {} entries", default.len()))),
    }
}

fn space(bounds: &[(&str, f64, f64)]) -> ParameterSpace {
    ParameterSpace::from_bounds(bounds.iter().map(|&(n, l, u)| (n, l, u))).expect("built-in bounds are valid")
}

/// Builds a named problem.
pub fn make_problem(name: &str, o: &ProblemOverrides) -> Result<Problem, ModelError> {
    let (pair, truth, default_sd, prior_normal) = match name {
        "toy1d" => {
            let pair = ForwardModelPair::new(
                space(&[("m", 0.0, 10.0)]),
                vec!["f".into()],
                Arc::new(ToySimulator { high: true }),
                Arc::new(ToySimulator { high: false }),
                10.0,
            )?;
            (pair, vec![2.0], 0.1, vec![])
        }
        "diffusion1d" => {
            let hi_n = resolution(&o.high_resolution, &[101])?[0];
            let lo_n = resolution(&o.low_resolution, &[11])?[0];
            let mut hi = DiffusionConfig { nodes: hi_n, ..DiffusionConfig::high() };
            let mut lo = DiffusionConfig { nodes: lo_n, ..DiffusionConfig::low() };
            if let Some(t) = &o.times {
                hi.times = t.clone();
                lo.times = t.clone();
            }
            if hi.nodes <= lo.nodes {
                return Err(ModelError::InvalidSetup("high-fidelity grid must be finer".into()));
            }
            let labels = hi
                .times
                .iter()
                .flat_map(|t| hi.sensors.iter().map(move |x| format!("u(x={x},t={t})")))
                .collect();
            let ratio = (hi.nodes as f64 / lo.nodes as f64) * (lo.dt / hi.dt);
            let pair = ForwardModelPair::new(
                space(&[("log_kappa", -3.0, 0.0), ("s", 0.5, 2.0)]),
                labels,
                Arc::new(DiffusionSimulator::new(hi)?),
                Arc::new(DiffusionSimulator::new(lo)?),
                ratio,
            )?;
            (pair, vec![0.2f64.ln(), 1.2], 0.005, vec![])
        }
        "plume5" => {
            let h = resolution(&o.high_resolution, &[80, 40])?;
            let l = resolution(&o.low_resolution, &[20, 10])?;
            let wells: Vec<(f64, f64)> = o
                .wells
                .as_ref()
                .map_or(vec![(10.0, 5.0)], |w| w.iter().map(|p| (p[0], p[1])).collect());
            let times = o.times.clone().unwrap_or_else(|| vec![6.0, 8.0, 10.0, 12.0, 14.0]);
            let labels = well_labels(&wells, &times, false);
            let pair = ForwardModelPair::new(
                space(&[
                    ("x_s", 3.0, 5.0),
                    ("y_s", 3.0, 7.0),
                    ("S_s", 10.0, 13.0),
                    ("t_on", 3.0, 5.0),
                    ("t_off", 9.0, 11.0),
                ]),
                labels,
                Arc::new(PlumeSimulator::uniform(h[0], h[1], 8.0, wells.clone(), times.clone())?),
                Arc::new(PlumeSimulator::uniform(l[0], l[1], 8.0, wells, times)?),
                (h[0] * h[1]) as f64 / (l[0] * l[1]) as f64 * (h[0] as f64 / l[0] as f64),
            )?;
            (pair, vec![3.854, 5.999, 11.044, 4.897, 9.075], 0.01, vec![])
        }
        "plume28" => {
            let h = resolution(&o.high_resolution, &[80, 40])?;
            let l = resolution(&o.low_resolution, &[20, 10])?;
            let wells: Vec<(f64, f64)> = o.wells.as_ref().map_or_else(
                || [7.0, 10.0, 13.0].iter().flat_map(|&x| [(x, 4.0), (x, 6.0)]).collect(),
                |w| w.iter().map(|p| (p[0], p[1])).collect(),
            );
            let times = o.times.clone().unwrap_or_else(|| vec![4.0, 6.0, 8.0, 10.0, 12.0]);
            let basis = Arc::new(KlBasis::new(Grid::new(40, 20, DOMAIN.0, DOMAIN.1)?, KlSpec::default())?);
            let mut labels = well_labels(&wells, &times, false);
            labels.extend(well_labels(&wells, &[], true));
            let mut bounds: Vec<(String, f64, f64)> = vec![("x_s".into(), 3.0, 5.0), ("y_s".into(), 4.0, 6.0)];
            bounds.extend((1..=6).map(|i| (format!("s{i}"), 0.0, 8.0)));
            bounds.extend((1..=basis.spec.n_terms).map(|i| (format!("xi{i}"), -4.0, 4.0)));
            let space = ParameterSpace::from_bounds(bounds).expect("built-in bounds are valid");
            let pair = ForwardModelPair::new(
                space,
                labels,
                Arc::new(PlumeKlSimulator::new(basis.clone(), h[0], h[1], wells.clone(), times.clone())?),
                Arc::new(PlumeKlSimulator::new(basis.clone(), l[0], l[1], wells, times)?),
                (h[0] * h[1]) as f64 / (l[0] * l[1]) as f64 * (h[0] as f64 / l[0] as f64),
            )?;
            let mut truth = vec![4.033, 5.405, 1.229, 7.628, 4.327, 5.438, 0.293, 6.474];
            let mut rng = seeding::stream_rng(0, "plume28-true-field");
            let normal: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
            truth.extend((0..basis.spec.n_terms).map(|_| normal.sample(&mut rng).clamp(-4.0, 4.0)));
            let normal_dims = (KL_SOURCE_PARAMS..KL_SOURCE_PARAMS + basis.spec.n_terms).collect();
            (pair, truth, 0.005, normal_dims)
        }
        other => return Err(ModelError::UnknownProblem(other.to_string())),
    };
    let truth = match &o.truth {
        Some(t) if t.len() != pair.space.dim() => {
            return Err(ModelError::DimensionMismatch {
                expected: pair.space.dim(),
                found: t.len(),
            })
        }
        Some(t) => t.clone(),
        None => truth,
    };
    if !pair.space.contains(&truth) {
        return Err(ModelError::InvalidSetup(format!("true parameters {truth:?} lie outside the prior box")));
    }
    let sd = o.noise_sd.unwrap_or(default_sd);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(ModelError::InvalidSetup(format!("noise_sd = {sd}")));
    }
    let prior = Prior::new(pair.space.clone(), prior_normal).map_err(|e| ModelError::InvalidSetup(e.to_string()))?;
    Ok(Problem {
        name: name.to_string(),
        noise_sd: vec![sd; pair.n_outputs()],
        pair,
        prior,
        truth,
    })
}

fn well_labels(wells: &[(f64, f64)], times: &[f64], heads: bool) -> Vec<String> {
    if heads {
        return wells.iter().map(|(x, y)| format!("h({x},{y})")).collect();
    }
    times
        .iter()
        .flat_map(|t| wells.iter().map(move |(x, y)| format!("c({x},{y},t={t})")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn plume5_prior_box() {
        let p = make_problem("plume5", &ProblemOverrides::default()).unwrap();
        assert_eq!(p.space().lower(), &[3.0, 3.0, 10.0, 3.0, 9.0]);
        assert_eq!(p.space().upper(), &[5.0, 7.0, 13.0, 5.0, 11.0]);
        assert_eq!(p.noise_sd, vec![0.01; 5]);
    }

    #[test]
    fn plume28_is_28_dimensional() {
        let p = make_problem("plume28", &ProblemOverrides::default()).unwrap();
        assert_eq!(p.space().dim(), 28);
        assert_eq!(&p.truth[..8], &[4.033, 5.405, 1.229, 7.628, 4.327, 5.438, 0.293, 6.474]);
        assert_eq!(p.pair.n_outputs(), 36);
        let out = p.pair.high.evaluate(&p.truth).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
        assert!(p.pair.low.evaluate(&p.truth).unwrap().len() == 36);
    }

    #[test]
    fn unknown_names_and_bad_overrides() {
        assert!(matches!(make_problem("nope", &ProblemOverrides::default()), Err(ModelError::UnknownProblem(_))));
        let o = ProblemOverrides {
            truth: Some(vec![20.0]),
            ..Default::default()
        };
        assert!(make_problem("toy1d", &o).is_err());
    }

    #[test]
    fn measurements_are_seeded() {
        let p = make_problem("diffusion1d", &ProblemOverrides::default()).unwrap();
        let a = p.synthetic_measurements(3).unwrap();
        assert_eq!(a, p.synthetic_measurements(3).unwrap());
        assert_ne!(a, p.synthetic_measurements(4).unwrap());
    }

    #[test]
    fn simulators_are_pure_and_layouts_agree() {
        for name in ["toy1d", "diffusion1d", "plume5"] {
            let p = make_problem(name, &ProblemOverrides::default()).unwrap();
            let mut rng = seeding::rng(1);
            for _ in 0..if name == "plume5" { 5 } else { 100 } {
                let m = p.space().sample(&mut rng);
                let a = p.pair.high.evaluate(&m).unwrap();
                assert_eq!(a, p.pair.high.evaluate(&m).unwrap());
                let b = p.pair.low.evaluate(&m).unwrap();
                assert_eq!(b, p.pair.low.evaluate(&m).unwrap());
                assert_eq!(a.len(), b.len());
                let _: f64 = rng.random();
            }
        }
    }
}
