//! Batch execution of one configured run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{Fidelity, Mode, RunConfig};
use super::figures::reproduce_figure;
use super::summary::export_posterior_summary;
use super::tables::{format_real, measurements_to_csv, parse_measurements, parse_traces, traces_to_csv, Table};
use super::{persist, read_file, write_file, IoError};
use crate::gp::fit_multioutput;
use crate::inference::{
    agp_run, amf_run, log_posterior_exact, log_posterior_surrogate, prior_design, AmfError, AmfState, HistoryRow,
    Measurements, TrainingSet,
};
use crate::mcmc::{self, rhat_series, ChainHistory};
use crate::models::{make_problem, Problem};
use crate::seeding;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    /// Files written, relative to `output_dir`, in write order.
    pub files: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, text: &str) -> Result<(), IoError> {
        write_file(&self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    mode: String,
    seed: u64,
    wall_clock_seconds: f64,
    files: &'a [String],
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    round: usize,
    error: String,
    eval_counts: (usize, usize),
    training: &'a TrainingSet,
    history: &'a [HistoryRow],
}

/// Runs the configured mode and writes its tables plus `manifest.toml` (the
/// resolved configuration, seed, crate version and wall-clock time) into
/// `cfg.output_dir`.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, IoError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = Outputs {
        dir: cfg.output_dir.clone(),
        files: Vec::new(),
    };
    match cfg.mode {
        Mode::ExactMcmc => exact(cfg, &mut out)?,
        Mode::SurrogateMcmc => surrogate(cfg, &mut out)?,
        Mode::Amf | Mode::Agp => adaptive(cfg, &mut out)?,
        Mode::FitGp => fit_only(cfg, &mut out)?,
        Mode::Diag => diag(cfg, &mut out)?,
        Mode::Figure => {
            let name = &cfg.figure.as_ref().expect("validated").name;
            for (file, text) in reproduce_figure(name, cfg.seed)? {
                out.write(&file, &text)?;
            }
        }
    }
    let mut files = out.files.clone();
    files.push("manifest.toml".into());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.to_string(),
        seed: cfg.seed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files: &files,
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| IoError::Config(format!("manifest: {e}")))?;
    out.write("manifest.toml", &text)?;
    Ok(RunOutcome {
        output_dir: out.dir,
        files: out.files,
    })
}

fn setup(cfg: &RunConfig) -> Result<(Problem, Measurements), IoError> {
    let pc = cfg.problem.as_ref().expect("validated");
    let problem = make_problem(&pc.name, &pc.overrides).map_err(|e| IoError::Config(e.to_string()))?;
    let meas = match &pc.measurements {
        Some(path) => parse_measurements(&read_file(path)?)?,
        None => problem
            .synthetic_measurements(pc.noise_seed.unwrap_or(cfg.seed))
            .map_err(|e| numerical(e.to_string()))?,
    };
    if meas.len() != problem.pair.n_outputs() {
        return Err(IoError::Input(format!(
            "{} measurements for problem `{}` with {} outputs",
            meas.len(),
            pc.name,
            problem.pair.n_outputs()
        )));
    }
    Ok((problem, meas))
}

fn numerical(message: String) -> IoError {
    IoError::Numerical {
        message,
        snapshot: None,
    }
}

fn write_chains(
    out: &mut Outputs,
    names: &[String],
    history: &ChainHistory,
    burn_in: f64,
    rhat_points: usize,
) -> Result<(), IoError> {
    let start = history.burn_in_start(burn_in);
    out.write("traces.csv", &traces_to_csv(names, history, 0))?;
    out.write("posterior.csv", &traces_to_csv(names, history, start))?;
    let (samples, _) = history.post_burn_in(burn_in);
    out.write("summary.csv", &export_posterior_summary(names, &samples)?)?;
    out.write("rhat.csv", &rhat_csv(names, history, rhat_points))
}

/// Running R-hat table: `n_kept,iteration,<parameters...>,converged`.
pub fn rhat_csv(names: &[String], history: &ChainHistory, n_points: usize) -> String {
    let mut header = vec!["n_kept".to_string(), "iteration".to_string()];
    header.extend(names.iter().cloned());
    header.push("converged".into());
    let mut t = Table::new(header);
    for r in rhat_series(&history.by_chain(), n_points) {
        let mut row = vec![r.n_kept.to_string(), history.iterations[r.n_kept - 1].to_string()];
        row.extend(r.per_parameter.iter().map(|x| format_real(*x)));
        row.push(u8::from(r.converged).to_string());
        t.push(row);
    }
    t.to_csv()
}

/// Channel group of an output label: the text before its first `(`.
fn channel_group(label: &str) -> &str {
    label.split('(').next().unwrap_or(label)
}

/// AMF history table: `iteration,n_high,n_low,acceptance_rate,max_rhat,
/// mean_sd_all`, then `mean_sd_<group>` per channel group in label order.
pub fn history_csv(labels: &[String], history: &[HistoryRow]) -> String {
    let mut groups: Vec<&str> = Vec::new();
    for l in labels {
        let g = channel_group(l);
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let mut header: Vec<String> = ["iteration", "n_high", "n_low", "acceptance_rate", "max_rhat", "mean_sd_all"]
        .map(String::from)
        .to_vec();
    header.extend(groups.iter().map(|g| format!("mean_sd_{g}")));
    let mut t = Table::new(header);
    for h in history {
        let mut row = vec![
            h.iteration.to_string(),
            h.n_high.to_string(),
            h.n_low.to_string(),
            format_real(h.acceptance_rate),
            format_real(h.max_rhat.unwrap_or(f64::NAN)),
            format_real(h.overall_sd()),
        ];
        for g in &groups {
            let vals: Vec<f64> = labels
                .iter()
                .zip(&h.mean_sd)
                .filter(|(l, _)| channel_group(l) == *g)
                .map(|(_, v)| *v)
                .collect();
            row.push(format_real(vals.iter().sum::<f64>() / vals.len() as f64));
        }
        t.push(row);
    }
    t.to_csv()
}

fn exact(cfg: &RunConfig, out: &mut Outputs) -> Result<(), IoError> {
    let (p, meas) = setup(cfg)?;
    out.write("measurements.csv", &measurements_to_csv(&meas))?;
    let sim = match cfg.exact.fidelity {
        Fidelity::High => p.pair.high.as_ref(),
        Fidelity::Low => p.pair.low.as_ref(),
    };
    let mut sampler = cfg.sampler.clone();
    sampler.seed = seeding::substream(cfg.seed, "mcmc");
    let target = |m: &[f64]| log_posterior_exact(m, sim, &p.prior, &meas);
    let run = mcmc::run(p.space(), &sampler, &target, None).map_err(|e| numerical(e.to_string()))?;
    write_chains(out, p.space().names(), &run.history, sampler.burn_in, cfg.rhat_points)
}

fn design_models(cfg: &RunConfig, p: &Problem) -> Result<Vec<crate::gp::MultiFidelityGp>, IoError> {
    let mut rng = seeding::stream_rng(cfg.seed, "design");
    let xl = prior_design(&p.prior, cfg.design.n_low, &mut rng);
    let xh = prior_design(&p.prior, cfg.design.n_high, &mut rng);
    let set = TrainingSet::evaluate(p.pair.high.as_ref(), Some(p.pair.low.as_ref()), &xh, &xl)
        .map_err(|e| numerical(e.to_string()))?;
    let data = set
        .datasets(p.space().dim(), p.pair.n_outputs())
        .map_err(|e| numerical(e.to_string()))?;
    let mut fit = cfg.fit.clone();
    fit.seed = seeding::substream(cfg.seed, "gp-fit");
    fit_multioutput(&data, &fit).map_err(|e| numerical(e.to_string()))
}

fn fit_only(cfg: &RunConfig, out: &mut Outputs) -> Result<(), IoError> {
    let (p, _) = setup(cfg)?;
    let models = design_models(cfg, &p)?;
    out.write("gp.json", &persist::gp_to_json(&models))
}

fn surrogate(cfg: &RunConfig, out: &mut Outputs) -> Result<(), IoError> {
    let (p, meas) = setup(cfg)?;
    out.write("measurements.csv", &measurements_to_csv(&meas))?;
    let models = design_models(cfg, &p)?;
    out.write("gp.json", &persist::gp_to_json(&models))?;
    let mut sampler = cfg.sampler.clone();
    sampler.seed = seeding::substream(cfg.seed, "mcmc");
    let target = |m: &[f64]| log_posterior_surrogate(m, &models, &p.prior, &meas);
    let run = mcmc::run(p.space(), &sampler, &target, None).map_err(|e| numerical(e.to_string()))?;
    write_chains(out, p.space().names(), &run.history, sampler.burn_in, cfg.rhat_points)
}

fn adaptive(cfg: &RunConfig, out: &mut Outputs) -> Result<(), IoError> {
    let (p, meas) = setup(cfg)?;
    out.write("measurements.csv", &measurements_to_csv(&meas))?;
    let mut amf = cfg.amf.clone();
    amf.seed = seeding::substream(cfg.seed, "amf");
    let result = match cfg.mode {
        Mode::Agp => agp_run(p.pair.high.as_ref(), &p.prior, &meas, &amf),
        _ => amf_run(&p.pair, &p.prior, &meas, &amf),
    };
    let state = match result {
        Ok((_, s)) => s,
        Err(e) => return Err(adaptive_error(e, &out.dir)),
    };
    let history = state.chains.as_ref().expect("at least one sampler run");
    write_chains(out, p.space().names(), history, amf.sampler.burn_in, cfg.rhat_points)?;
    out.write("history.csv", &history_csv(&p.pair.labels, &state.history))?;
    out.write("gp.json", &persist::gp_to_json(&state.models))
}

fn adaptive_error(e: AmfError, dir: &Path) -> IoError {
    match e {
        AmfError::InvalidConfig(m) => IoError::Config(m),
        AmfError::FitFailed {
            round,
            ref source,
            ref snapshot,
        } => {
            let path = dir.join("snapshot.json");
            let written = write_snapshot(&path, round, &source.to_string(), snapshot);
            IoError::Numerical {
                message: e.to_string(),
                snapshot: written.ok().map(|_| path),
            }
        }
        other => numerical(other.to_string()),
    }
}

fn write_snapshot(path: &Path, round: usize, error: &str, s: &AmfState) -> Result<(), IoError> {
    let snap = Snapshot {
        round,
        error: error.to_string(),
        eval_counts: s.eval_counts,
        training: &s.training,
        history: &s.history,
    };
    write_file(path, &serde_json::to_string_pretty(&snap).expect("plain data serializes"))
}

fn diag(cfg: &RunConfig, out: &mut Outputs) -> Result<(), IoError> {
    let d = cfg.diag.as_ref().expect("validated");
    let traces = parse_traces(&read_file(&d.traces)?)?;
    if traces.history.n_kept() == 0 {
        return Err(IoError::Input("trace file has no rows".into()));
    }
    out.write("rhat.csv", &rhat_csv(&traces.names, &traces.history, cfg.rhat_points))
}
