//! The run configuration file (TOML).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::gp::FitConfig;
use crate::inference::AmfConfig;
use crate::mcmc::SamplerConfig;
use crate::models::ProblemOverrides;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ExactMcmc,
    SurrogateMcmc,
    Amf,
    Agp,
    FitGp,
    Diag,
    Figure,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::ExactMcmc,
        Mode::SurrogateMcmc,
        Mode::Amf,
        Mode::Agp,
        Mode::FitGp,
        Mode::Diag,
        Mode::Figure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::ExactMcmc => "exact-mcmc",
            Mode::SurrogateMcmc => "surrogate-mcmc",
            Mode::Amf => "amf",
            Mode::Agp => "agp",
            Mode::FitGp => "fit-gp",
            Mode::Diag => "diag",
            Mode::Figure => "figure",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| IoError::Config(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    #[default]
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `toy1d`, `diffusion1d`, `plume5` or `plume28`.
    pub name: String,
    #[serde(default)]
    pub overrides: ProblemOverrides,
    /// Measurements CSV; synthetic data from the true parameters when absent.
    pub measurements: Option<PathBuf>,
    /// Seed of the synthetic measurement noise; defaults to the run seed.
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    /// Which simulator the direct sampler evaluates.
    pub fidelity: Fidelity,
}

/// Prior design used by `fit-gp` and `surrogate-mcmc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub n_low: usize,
    pub n_high: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self { n_low: 20, n_high: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagConfig {
    /// Trace CSV to diagnose.
    pub traces: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    /// `fig1`, `fig6`, `fig9` or `example2-bimodal`.
    pub name: String,
}

/// Everything a run needs. Seeds inside the sections are replaced by streams
/// derived from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Points in the running R-hat table.
    #[serde(default = "default_rhat_points")]
    pub rhat_points: usize,
    pub problem: Option<ProblemConfig>,
    /// Sampler for `exact-mcmc` and `surrogate-mcmc`.
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Adaptive loop for `amf` and `agp` (its inner sampler is `[amf.sampler]`).
    #[serde(default)]
    pub amf: AmfConfig,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default)]
    pub design: DesignConfig,
    /// GP fitting for `fit-gp` and `surrogate-mcmc`.
    #[serde(default)]
    pub fit: FitConfig,
    pub diag: Option<DiagConfig>,
    pub figure: Option<FigureConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_rhat_points() -> usize {
    20
}

pub const FIGURES: [&str; 4] = ["fig1", "fig6", "fig9", "example2-bimodal"];

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            output_dir: default_output_dir(),
            rhat_points: default_rhat_points(),
            problem: None,
            sampler: SamplerConfig::default(),
            amf: AmfConfig::default(),
            exact: ExactConfig::default(),
            design: DesignConfig::default(),
            fit: FitConfig::default(),
            diag: None,
            figure: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema check only; mode-specific requirements are left to [`RunConfig::validate`].
    pub fn parse_unvalidated(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Checks that the sections the mode needs are present and consistent.
    pub fn validate(&self) -> Result<(), IoError> {
        let need = |what: &str| IoError::Config(format!("mode `{}` needs a [{what}] section", self.mode));
        match self.mode {
            Mode::Diag => {
                self.diag.as_ref().ok_or_else(|| need("diag"))?;
            }
            Mode::Figure => {
                let f = self.figure.as_ref().ok_or_else(|| need("figure"))?;
                if !FIGURES.contains(&f.name.as_str()) {
                    return Err(IoError::Config(format!(
                        "unknown figure `{}` (expected one of {})",
                        f.name,
                        FIGURES.join(", ")
                    )));
                }
            }
            _ => {
                self.problem.as_ref().ok_or_else(|| need("problem"))?;
            }
        }
        if self.rhat_points == 0 {
            return Err(IoError::Config("rhat_points must be positive".into()));
        }
        match self.mode {
            Mode::ExactMcmc | Mode::SurrogateMcmc => self.sampler.validate().map_err(|e| IoError::Config(e.to_string()))?,
            Mode::Amf | Mode::Agp => self.amf.validate().map_err(|e| IoError::Config(e.to_string()))?,
            _ => {}
        }
        if matches!(self.mode, Mode::SurrogateMcmc | Mode::FitGp) && self.design.n_high == 0 {
            return Err(IoError::Config("design.n_high must be at least 1".into()));
        }
        Ok(())
    }
}
