//! Adaptive multi-fidelity Markov chain Monte Carlo.
//!
//! Bayesian parameter inference that fuses a cheap low-fidelity simulator and an
//! expensive high-fidelity simulator through an auto-regressive Gaussian-process
//! system. The surrogate is refined where the posterior lives: each round runs an
//! archive-based differential-evolution sampler on the current surrogate, draws new
//! design points from the approximate posterior, evaluates both simulators there
//! and refits.
//!
//! Module map:
//! - [`gp`]: squared-exponential kernels, single- and multi-fidelity GP regression,
//!   marginal-likelihood fitting.
//! - [`mcmc`]: DREAM(ZS)-style sampler and Gelman-Rubin diagnostics.
//! - [`inference`]: likelihoods, posteriors and the adaptive loop.
//! - [`models`]: built-in simulator pairs (toy, diffusion, groundwater plume).
//! - [`io`]: configuration, CSV formats, model persistence and the batch runner.

pub mod gp;
pub mod inference;
pub mod io;
pub mod mcmc;
pub mod models;
pub mod seeding;
pub mod space;
pub mod stats;

pub use space::{ParameterSpace, SpaceError};
