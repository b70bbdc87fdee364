//! The adaptive multi-fidelity loop.
//!
//! Round 0 fits the surrogate to a prior design and samples its posterior. Each
//! later round draws new design points from the latest posterior samples, runs
//! the simulators there, refits, and continues the sampler from the previous
//! round's archive and chain states.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::training::{prune_training, PrunePolicy, TrainingRow, TrainingSet};
use super::{log_posterior_surrogate, surrogate_predict, Measurements, Prior};
use crate::gp::{fit_channels, rows_close, FidelityDataset, FitConfig, GpError, MultiFidelityGp};
use crate::mcmc::{self, ChainHistory, McmcError, RhatReport, SamplerConfig, WarmStart};
use crate::models::{ForwardModelPair, ModelError, Simulator};
use crate::seeding;

/// Candidate draws from the posterior pool before falling back to the prior.
const MAX_RESAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmfConfig {
    pub n_low_init: usize,
    pub n_high_init: usize,
    pub max_iterations: usize,
    pub batch_high: usize,
    pub batch_low: usize,
    /// Training-set cap; `None` keeps every row.
    pub prune: Option<PrunePolicy>,
    /// Per-round sampler settings. Its `seed` is replaced by a per-round seed.
    pub sampler: SamplerConfig,
    /// First-round fit settings. Its `seed` is replaced by a per-round seed.
    pub fit: FitConfig,
    /// Optimizer starts for refits after round 0; the previous optimum is one of them.
    pub refit_starts: usize,
    /// Optimizer iteration cap for refits; `None` keeps `fit.max_iterations`.
    pub refit_max_iterations: Option<usize>,
    /// Length of the last sampler run; `None` keeps `sampler.n_iterations`.
    pub final_iterations: Option<usize>,
    /// Posterior samples averaged over for the per-round GP standard deviation.
    pub history_samples: usize,
    pub seed: u64,
}

impl Default for AmfConfig {
    fn default() -> Self {
        Self {
            n_low_init: 20,
            n_high_init: 5,
            max_iterations: 10,
            batch_high: 1,
            batch_low: 1,
            prune: None,
            sampler: SamplerConfig {
                n_iterations: 1000,
                ..SamplerConfig::default()
            },
            fit: FitConfig::default(),
            refit_starts: 2,
            refit_max_iterations: None,
            final_iterations: None,
            history_samples: 400,
            seed: 0,
        }
    }
}

impl AmfConfig {
    pub fn validate(&self) -> Result<(), AmfError> {
        let bad = |m: String| Err(AmfError::InvalidConfig(m));
        if self.n_high_init == 0 {
            return bad("n_high_init must be at least 1".into());
        }
        if self.batch_high == 0 {
            return bad("batch_high must be at least 1".into());
        }
        if self.batch_low == 0 && self.n_low_init > 0 {
            return bad("batch_low must be at least 1 when low-fidelity data are used".into());
        }
        if self.refit_starts == 0 || self.history_samples == 0 || self.refit_max_iterations == Some(0) {
            return bad("refit_starts, refit_max_iterations and history_samples must be positive".into());
        }
        if let Some(p) = &self.prune {
            if p.max_size < self.n_high_init {
                return bad(format!(
                    "prune.max_size = {} is below n_high_init = {}",
                    p.max_size, self.n_high_init
                ));
            }
        }
        self.sampler.validate()?;
        Ok(())
    }

    /// Sampler settings used in round `round`.
    pub fn sampler_for_round(&self, round: usize) -> SamplerConfig {
        let mut s = self.sampler.clone();
        s.seed = seeding::indexed(self.seed, "amf-mcmc", round as u64);
        if round == self.max_iterations {
            if let Some(n) = self.final_iterations {
                s.n_iterations = n;
            }
        }
        s
    }

    fn fit_configs(&self, round: usize, n_channels: usize, previous: Option<&[MultiFidelityGp]>) -> Vec<FitConfig> {
        let base = match previous {
            Some(_) => seeding::indexed(self.seed, "amf-fit", round as u64),
            None => seeding::indexed(self.seed, "amf-fit-fresh", round as u64),
        };
        (0..n_channels)
            .map(|c| {
                let mut f = self.fit.clone();
                f.seed = seeding::indexed(base, "channel", c as u64);
                f.warm_start = None;
                if let Some(prev) = previous {
                    f.n_starts = self.refit_starts;
                    if let Some(n) = self.refit_max_iterations {
                        f.max_iterations = n;
                    }
                    f.warm_start = Some(prev[c].hyper().clone());
                }
                f
            })
            .collect()
    }
}

/// Diagnostics recorded after each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub n_high: usize,
    pub n_low: usize,
    /// Mean predictive standard deviation over posterior samples, per channel.
    pub mean_sd: Vec<f64>,
    pub acceptance_rate: f64,
    pub max_rhat: Option<f64>,
}

impl HistoryRow {
    /// Mean of `mean_sd` over all channels.
    pub fn overall_sd(&self) -> f64 {
        self.mean_sd.iter().sum::<f64>() / self.mean_sd.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct AmfState {
    pub iteration: usize,
    pub dim: usize,
    pub n_outputs: usize,
    pub training: TrainingSet,
    pub models: Vec<MultiFidelityGp>,
    pub posterior_samples: Vec<Vec<f64>>,
    /// Archive and final chain states of the latest sampler run.
    pub archive: Option<WarmStart>,
    /// Simulator calls so far as (high, low).
    pub eval_counts: (usize, usize),
    pub history: Vec<HistoryRow>,
    /// Thinned traces of the latest sampler run.
    pub chains: Option<ChainHistory>,
    pub rhat: Option<RhatReport>,
}

impl AmfState {
    /// Per-channel training data.
    pub fn datasets(&self) -> Result<Vec<FidelityDataset>, GpError> {
        self.training.datasets(self.dim, self.n_outputs)
    }
}

#[derive(Debug, Error)]
pub enum AmfError {
    #[error("invalid AMF configuration: {0}")]
    InvalidConfig(String),
    #[error("{fidelity}-fidelity simulator failed at {input:?}: {source}")]
    Simulator {
        fidelity: &'static str,
        input: Vec<f64>,
        source: ModelError,
    },
    #[error("GP fit failed in round {round} (also after a fresh retry): {source}")]
    FitFailed {
        round: usize,
        source: GpError,
        snapshot: Box<AmfState>,
    },
    #[error(transparent)]
    Data(#[from] GpError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}

/// Runs the adaptive loop with both simulators. Returns the final posterior samples.
pub fn amf_run(
    pair: &ForwardModelPair,
    prior: &Prior,
    meas: &Measurements,
    cfg: &AmfConfig,
) -> Result<(Vec<Vec<f64>>, AmfState), AmfError> {
    amf_run_with_observer(pair, prior, meas, cfg, &mut |_| {})
}

/// [`amf_run`] calling `observer` after every round, including round 0.
pub fn amf_run_with_observer(
    pair: &ForwardModelPair,
    prior: &Prior,
    meas: &Measurements,
    cfg: &AmfConfig,
    observer: &mut dyn FnMut(&AmfState),
) -> Result<(Vec<Vec<f64>>, AmfState), AmfError> {
    run_loop(pair.high.as_ref(), Some(pair.low.as_ref()), prior, meas, cfg, observer)
}

/// Single-fidelity variant: the adaptive loop with no low-fidelity data.
pub fn agp_run(
    high: &dyn Simulator,
    prior: &Prior,
    meas: &Measurements,
    cfg: &AmfConfig,
) -> Result<(Vec<Vec<f64>>, AmfState), AmfError> {
    let cfg = AmfConfig {
        n_low_init: 0,
        batch_low: 0,
        ..cfg.clone()
    };
    run_loop(high, None, prior, meas, &cfg, &mut |_| {})
}

fn run_loop(
    high: &dyn Simulator,
    low: Option<&dyn Simulator>,
    prior: &Prior,
    meas: &Measurements,
    cfg: &AmfConfig,
    observer: &mut dyn FnMut(&AmfState),
) -> Result<(Vec<Vec<f64>>, AmfState), AmfError> {
    cfg.validate()?;
    let n_outputs = high.n_outputs();
    if meas.len() != n_outputs || low.is_some_and(|l| l.n_outputs() != n_outputs) {
        return Err(AmfError::InvalidConfig(format!(
            "{} measurements for a simulator with {} outputs",
            meas.len(),
            n_outputs
        )));
    }
    let n_low_init = if low.is_some() { cfg.n_low_init } else { 0 };
    let batch_low = if low.is_some() { cfg.batch_low } else { 0 };
    let space = prior.space();
    let mut state = AmfState {
        iteration: 0,
        dim: space.dim(),
        n_outputs,
        training: TrainingSet::default(),
        models: Vec::new(),
        posterior_samples: Vec::new(),
        archive: None,
        eval_counts: (0, 0),
        history: Vec::new(),
        chains: None,
        rhat: None,
    };

    let mut design_rng = seeding::stream_rng(cfg.seed, "amf-design");
    let low_inputs = prior_design(prior, n_low_init, &mut design_rng);
    let high_inputs = prior_design(prior, cfg.n_high_init, &mut design_rng);
    if let Some(low) = low {
        append(&mut state, low, &low_inputs, false, 0)?;
    }
    append(&mut state, high, &high_inputs, true, 0)?;

    let mut draw_rng = seeding::stream_rng(cfg.seed, "amf-refine");
    for round in 0..=cfg.max_iterations {
        if round > 0 {
            let pool = std::mem::take(&mut state.posterior_samples);
            let new_high = draw_distinct(&pool, &state.training.high, cfg.batch_high, prior, &mut draw_rng);
            let new_low = draw_distinct(&pool, &state.training.low, batch_low, prior, &mut draw_rng);
            state.posterior_samples = pool;
            append(&mut state, high, &new_high, true, round)?;
            if let Some(low) = low {
                append(&mut state, low, &new_low, false, round)?;
            }
            if let Some(policy) = &cfg.prune {
                state.training = prune_training(&state.training, meas, policy, cfg.n_high_init);
            }
        }
        state.iteration = round;
        refit(&mut state, cfg, round)?;

        let models = &state.models;
        let target = |m: &[f64]| log_posterior_surrogate(m, models, prior, meas);
        let out = mcmc::run(space, &cfg.sampler_for_round(round), &target, state.archive.as_ref())?;
        state.posterior_samples = if out.samples.is_empty() {
            out.ensemble.states().to_vec()
        } else {
            out.samples
        };
        state.archive = Some(out.ensemble.warm_start());
        let row = HistoryRow {
            iteration: round,
            n_high: state.training.high.len(),
            n_low: state.training.low.len(),
            mean_sd: mean_posterior_sd(&state.models, &state.posterior_samples, cfg.history_samples),
            acceptance_rate: out.ensemble.acceptance_rate(),
            max_rhat: out
                .rhat
                .as_ref()
                .map(|r| r.per_parameter.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        };
        log::info!(
            "AMF round {round}: N_H = {}, N_L = {}, mean GP sd = {:.4e}, acceptance = {:.3}",
            row.n_high,
            row.n_low,
            row.overall_sd(),
            row.acceptance_rate
        );
        state.history.push(row);
        state.chains = Some(out.history);
        state.rhat = out.rhat;
        observer(&state);
    }
    Ok((state.posterior_samples.clone(), state))
}

fn refit(state: &mut AmfState, cfg: &AmfConfig, round: usize) -> Result<(), AmfError> {
    let datasets = state.datasets()?;
    let previous = (!state.models.is_empty()).then_some(state.models.as_slice());
    let first = fit_channels(&datasets, &cfg.fit_configs(round, state.n_outputs, previous));
    let fitted = match first {
        Ok(m) => Ok(m),
        Err(e) => {
            log::warn!("round {round}: GP fit failed ({e}); retrying with fresh starts");
            fit_channels(&datasets, &cfg.fit_configs(round, state.n_outputs, None))
        }
    };
    match fitted {
        Ok(models) => {
            state.models = models;
            Ok(())
        }
        Err(source) => Err(AmfError::FitFailed {
            round,
            source,
            snapshot: Box::new(state.clone()),
        }),
    }
}

fn append(
    state: &mut AmfState,
    sim: &dyn Simulator,
    inputs: &[Vec<f64>],
    is_high: bool,
    round: usize,
) -> Result<(), AmfError> {
    let fidelity = if is_high { "high" } else { "low" };
    let outputs: Vec<Result<Vec<f64>, ModelError>> = inputs.par_iter().map(|m| sim.evaluate(m)).collect();
    if is_high {
        state.eval_counts.0 += inputs.len();
    } else {
        state.eval_counts.1 += inputs.len();
    }
    for (m, out) in inputs.iter().zip(outputs) {
        let out = out.and_then(|o| {
            if o.len() != state.n_outputs {
                Err(ModelError::DimensionMismatch {
                    expected: state.n_outputs,
                    found: o.len(),
                })
            } else if o.iter().any(|v| !v.is_finite()) {
                Err(ModelError::Numerical("non-finite output".into()))
            } else {
                Ok(o)
            }
        });
        let outputs = out.map_err(|source| AmfError::Simulator {
            fidelity,
            input: m.clone(),
            source,
        })?;
        let row = TrainingRow {
            input: m.clone(),
            outputs,
            round,
        };
        if is_high {
            state.training.high.push(row);
        } else {
            state.training.low.push(row);
        }
    }
    Ok(())
}

/// `n` prior draws, pairwise distinct.
pub fn prior_design<R: Rng + ?Sized>(prior: &Prior, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let m = prior.sample(rng);
        if !out.iter().any(|r| rows_close(r, &m)) {
            out.push(m);
        }
    }
    out
}

/// `n` rows drawn uniformly from `pool`, none close to an existing training input
/// or to each other. Falls back to prior draws when the pool is exhausted.
fn draw_distinct<R: Rng>(
    pool: &[Vec<f64>],
    existing: &[TrainingRow],
    n: usize,
    prior: &Prior,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    let taken = |m: &[f64], out: &[Vec<f64>]| {
        existing.iter().any(|r| rows_close(&r.input, m)) || out.iter().any(|r| rows_close(r, m))
    };
    while out.len() < n {
        let mut pick = None;
        if !pool.is_empty() {
            for _ in 0..MAX_RESAMPLE {
                let c = &pool[rng.random_range(0..pool.len())];
                if !taken(c, &out) {
                    pick = Some(c.clone());
                    break;
                }
            }
        }
        let m = pick.unwrap_or_else(|| {
            log::warn!("no fresh posterior sample found; drawing a design point from the prior");
            loop {
                let c = prior.sample(rng);
                if !taken(&c, &out) {
                    break c;
                }
            }
        });
        out.push(m);
    }
    out
}

/// Evenly spaced subset of at most `n` rows.
pub fn spread_subset(rows: &[Vec<f64>], n: usize) -> Vec<&[f64]> {
    let k = n.min(rows.len());
    (0..k).map(|i| rows[i * rows.len() / k].as_slice()).collect()
}

/// Mean predictive standard deviation per channel over up to `n` samples.
pub fn mean_posterior_sd(models: &[MultiFidelityGp], samples: &[Vec<f64>], n: usize) -> Vec<f64> {
    let subset = spread_subset(samples, n);
    let mut sums = vec![0.0; models.len()];
    let mut count = 0usize;
    for m in &subset {
        if let Some((_, var)) = surrogate_predict(m, models) {
            for (s, v) in sums.iter_mut().zip(var) {
                *s += v.max(0.0).sqrt();
            }
            count += 1;
        }
    }
    sums.into_iter().map(|s| s / count as f64).collect()
}

/// Root-mean-square difference between the surrogate mean and the high-fidelity
/// simulator over up to `n` posterior samples, per channel. Simulator calls made
/// here are diagnostics and are not part of the run's evaluation budget.
pub fn surrogate_rmse(state: &AmfState, high: &dyn Simulator, n: usize) -> Result<Vec<f64>, AmfError> {
    let subset = spread_subset(&state.posterior_samples, n);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = subset
        .par_iter()
        .map(|m| {
            let truth = high.evaluate(m).map_err(|source| AmfError::Simulator {
                fidelity: "high",
                input: m.to_vec(),
                source,
            })?;
            let (mean, _) = surrogate_predict(m, &state.models)
                .ok_or_else(|| GpError::InvalidData(format!("prediction failed at {m:?}")))?;
            Ok((truth, mean))
        })
        .collect::<Result<_, AmfError>>()?;
    let mut sq = vec![0.0; state.n_outputs];
    for (truth, mean) in &rows {
        for ((s, t), g) in sq.iter_mut().zip(truth).zip(mean) {
            *s += (t - g) * (t - g);
        }
    }
    let k = rows.len().max(1) as f64;
    Ok(sq.into_iter().map(|s| (s / k).sqrt()).collect())
}
