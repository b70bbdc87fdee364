use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("duplicate {fidelity}-fidelity input rows {first} and {second}")]
    DuplicateInput {
        fidelity: &'static str,
        first: usize,
        second: usize,
    },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error(
        "covariance not factorizable even with maximal jitter \
         (N_L = {n_low}, N_H = {n_high}, hyperparameters {hyper})"
    )]
    NumericalDegeneracy {
        n_low: usize,
        n_high: usize,
        hyper: String,
    },
    #[error("channel {channel}: {source}")]
    Channel {
        channel: usize,
        #[source]
        source: Box<GpError>,
    },
}
