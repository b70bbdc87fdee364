//! Archive-based differential-evolution MCMC in the DREAM(ZS) family.
//!
//! `N_c` chains propose jumps built from differences of rows of a shared archive
//! `Z` of thinned past states. Two jump types are used: the parallel-direction
//! jump on a random crossover subspace and the snooker jump along the line through
//! the current state and an archive anchor. Every chain owns a ChaCha stream, so
//! chains can be advanced concurrently with results identical to a serial run.

mod config;
mod ensemble;
mod proposal;
mod rhat;

pub use config::SamplerConfig;
pub use ensemble::{run, ChainEnsemble, ChainHistory, RunOutput, StepStats, WarmStart};
pub use proposal::{parallel_direction_move, snooker_move};
pub use rhat::{rhat, rhat_series, RhatReport, RHAT_THRESHOLD};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum McmcError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("target returned NaN at an initial point {0:?}")]
    InvalidTarget(Vec<f64>),
    #[error("archive has {rows} rows but at least {needed} are needed")]
    InsufficientArchive { rows: usize, needed: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("R-hat needs at least 2 chains and 4 kept states per chain (got {chains} x {kept})")]
    TooFewSamples { chains: usize, kept: usize },
}
