use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{log_likelihood, Measurements};
use crate::gp::{FidelityDataset, GpError};
use crate::models::{ModelError, Simulator};

/// Simulator wrapper that counts successful and failed calls.
pub struct CountingSimulator {
    inner: Arc<dyn Simulator>,
    calls: AtomicUsize,
}

impl CountingSimulator {
    pub fn new(inner: Arc<dyn Simulator>) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Simulator for CountingSimulator {
    fn n_outputs(&self) -> usize {
        self.inner.n_outputs()
    }

    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(m)
    }
}

/// One simulator run kept for training: input, all output channels, and the
/// adaptive round that added it (0 for the initial design).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub input: Vec<f64>,
    pub outputs: Vec<f64>,
    pub round: usize,
}

/// Multi-channel training data for both fidelity levels. Rows hold every
/// channel, so per-channel datasets always share their input matrices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub low: Vec<TrainingRow>,
    pub high: Vec<TrainingRow>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.low.len() + self.high.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty() && self.high.is_empty()
    }

    /// Runs the simulators on a design. Rows are tagged round 0.
    pub fn evaluate(
        high: &dyn Simulator,
        low: Option<&dyn Simulator>,
        high_inputs: &[Vec<f64>],
        low_inputs: &[Vec<f64>],
    ) -> Result<Self, ModelError> {
        let run = |sim: &dyn Simulator, xs: &[Vec<f64>]| -> Result<Vec<TrainingRow>, ModelError> {
            xs.par_iter()
                .map(|x| {
                    Ok(TrainingRow {
                        input: x.clone(),
                        outputs: sim.evaluate(x)?,
                        round: 0,
                    })
                })
                .collect()
        };
        Ok(Self {
            high: run(high, high_inputs)?,
            low: match low {
                Some(l) => run(l, low_inputs)?,
                None => Vec::new(),
            },
        })
    }

    /// One dataset per output channel.
    pub fn datasets(&self, dim: usize, n_outputs: usize) -> Result<Vec<FidelityDataset>, GpError> {
        let xl: Vec<Vec<f64>> = self.low.iter().map(|r| r.input.clone()).collect();
        let xh: Vec<Vec<f64>> = self.high.iter().map(|r| r.input.clone()).collect();
        (0..n_outputs)
            .map(|c| {
                let yl: Vec<f64> = self.low.iter().map(|r| r.outputs[c]).collect();
                let yh: Vec<f64> = self.high.iter().map(|r| r.outputs[c]).collect();
                FidelityDataset::from_rows(dim, &xl, &yl, &xh, &yh)
            })
            .collect()
    }
}

/// Pruning keeps the training set at most `max_size` rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrunePolicy {
    pub max_size: usize,
}

/// Removes the rows whose stored outputs explain the data worst (lowest exact
/// likelihood) until at most `policy.max_size` rows remain: low-fidelity rows
/// first, then high-fidelity rows, never going below `min_high` high-fidelity
/// rows. Ties drop the oldest row first.
pub fn prune_training(set: &TrainingSet, meas: &Measurements, policy: &PrunePolicy, min_high: usize) -> TrainingSet {
    let mut excess = set.len().saturating_sub(policy.max_size);
    if excess == 0 {
        return set.clone();
    }
    let zeros = vec![0.0; meas.len()];
    let drop_from = |rows: &[TrainingRow], budget: usize| -> Vec<bool> {
        let mut order: Vec<(f64, usize, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (log_likelihood(&r.outputs, meas, &zeros), r.round, i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut drop = vec![false; rows.len()];
        for &(_, _, i) in order.iter().take(budget) {
            drop[i] = true;
        }
        drop
    };
    let n_low = excess.min(set.low.len());
    let drop_low = drop_from(&set.low, n_low);
    excess -= n_low;
    let n_high = excess.min(set.high.len().saturating_sub(min_high));
    let drop_high = drop_from(&set.high, n_high);
    let keep = |rows: &[TrainingRow], drop: &[bool]| -> Vec<TrainingRow> {
        rows.iter().zip(drop).filter(|(_, d)| !**d).map(|(r, _)| r.clone()).collect()
    };
    TrainingSet {
        low: keep(&set.low, &drop_low),
        high: keep(&set.high, &drop_high),
    }
}
