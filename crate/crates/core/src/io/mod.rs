//! Configuration, CSV formats, model persistence and the batch runner.
//!
//! Every table is CSV (see [`tables`]). Randomness flows from the run seed
//! through named sub-streams: `mcmc`, `design`, `gp-fit`, `amf` and `noise`.

mod config;
mod figures;
mod persist;
mod runner;
mod summary;
pub mod tables;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{DesignConfig, DiagConfig, ExactConfig, Fidelity, FigureConfig, Mode, ProblemConfig, RunConfig, FIGURES};
pub use figures::{
    bimodal_config, fig1, fig6_config, fig9, fig9_config, reproduce_figure, Fig1Output, Fig9Row, BIMODAL_BANDWIDTH,
    FIG9_SCHEDULE,
};
pub use persist::{gp_from_json, gp_to_json, load_gp, persist_gp, GP_FORMAT_VERSION};
pub use runner::{execute, history_csv, rhat_csv, RunOutcome};
pub use summary::{export_posterior_summary, summarize, ParameterSummary};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error("numerical failure: {message}{}", snapshot.as_ref().map(|p| format!(" (state snapshot: {})", p.display())).unwrap_or_default())]
    Numerical { message: String, snapshot: Option<PathBuf> },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    /// Process exit code: 2 for bad configuration or input, 3 for numerical
    /// failures, 1 for file-system errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Config(_) | IoError::Parse(_) | IoError::Input(_) | IoError::Version { .. } => 2,
            IoError::Numerical { .. } => 3,
            IoError::File { .. } => 1,
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    let file_err = |source| IoError::File {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(file_err)?;
    }
    std::fs::write(path, text).map_err(file_err)
}
