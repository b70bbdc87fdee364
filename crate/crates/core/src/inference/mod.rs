//! Likelihoods, posteriors and the adaptive multi-fidelity loop.

mod amf;
mod likelihood;
mod measurements;
mod prior;
mod training;

pub use amf::{
    agp_run, amf_run, amf_run_with_observer, mean_posterior_sd, prior_design, spread_subset, surrogate_rmse, AmfConfig, AmfError,
    AmfState, HistoryRow,
};
pub use likelihood::{log_likelihood, log_posterior_exact, log_posterior_surrogate, surrogate_predict};
pub use measurements::{MeasurementError, Measurements};
pub use prior::Prior;
pub use training::{prune_training, CountingSimulator, PrunePolicy, TrainingRow, TrainingSet};
