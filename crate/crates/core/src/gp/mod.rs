//! Gaussian-process regression over one or more fidelity levels.
//!
//! The two-level system follows the auto-regressive (Kennedy-O'Hagan) form
//! `u_H(m) = rho * u_L(m) + delta(m)` with independent zero-mean GPs `u_L` and
//! `delta`, both with squared-exponential kernels. Conditioning on mixed-fidelity
//! data yields a predictive normal distribution for the high-fidelity output.
//! [`multilevel`] generalises the recursion to any number of levels.
//!
//! Hyperparameters live in standardized output units: outputs are centred and
//! scaled (pooled over both fidelity levels) before fitting, and predictions are
//! mapped back.

mod covariance;
mod dataset;
mod error;
mod fit;
mod hyper;
mod kernel;
mod model;
pub mod multilevel;
pub mod optim;

pub use covariance::{assemble_joint_covariance, nlml, nlml_with_gradient, JITTER_MAX, JITTER_START};
pub use dataset::{rows_close, FidelityDataset, DUPLICATE_TOLERANCE};
pub use error::GpError;
pub(crate) use fit::fit_channels;
pub use fit::{fit, fit_multioutput, fit_with_report, FitConfig, FitReport};
pub use hyper::{HyperLayout, MfHyperparams};
pub use kernel::{kernel_se, KernelParams};
pub use model::{GpPrediction, MultiFidelityGp, Standardization};
