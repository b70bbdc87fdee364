//! Data tables behind the figures: the one-dimensional fusion demo, the
//! refinement history, the batch-size study and the bimodal plume posterior.
//! Only CSV is produced; plotting is left to other tools.

use rand::Rng;

use super::runner::history_csv;
use super::tables::{format_real, Table};
use super::IoError;
use crate::gp::{fit, FidelityDataset, FitConfig};
use crate::inference::{amf_run, surrogate_rmse, AmfConfig, AmfState};
use crate::mcmc::SamplerConfig;
use crate::models::{make_problem, toy_high, toy_low, Problem, ProblemOverrides};
use crate::{seeding, stats};

/// KDE bandwidth for counting `y_s` modes in the plume posterior.
pub const BIMODAL_BANDWIDTH: f64 = 0.2;

/// (batch size, rounds) pairs of the batch-size study.
pub const FIG9_SCHEDULE: [(usize, usize); 4] = [(1, 40), (2, 20), (5, 8), (10, 4)];

/// Posterior samples used for the surrogate-vs-simulator RMSE.
const RMSE_SAMPLES: usize = 400;

pub struct Fig1Output {
    /// `m,f_H,f_L,sf_mean,sf_sd,mf_mean,mf_sd` on a 201-point grid.
    pub table: String,
    pub rmse_single: f64,
    pub rmse_multi: f64,
}

/// One point per equal-width stratum of `[lo, hi]`, uniformly placed within it.
fn stratified<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let w = (hi - lo) / n as f64;
    (0..n).map(|k| vec![lo + w * (k as f64 + rng.random::<f64>())]).collect()
}

/// Sine pair on `[0, 10]`: 20 evenly spaced low-fidelity points and 3 stratified
/// high-fidelity points for the two-level GP, against a single-fidelity GP on 4
/// stratified high-fidelity points.
pub fn fig1(seed: u64) -> Result<Fig1Output, IoError> {
    let err = |e: crate::gp::GpError| IoError::Numerical {
        message: e.to_string(),
        snapshot: None,
    };
    let mut rng = seeding::stream_rng(seed, "design");
    let xl: Vec<Vec<f64>> = (0..20).map(|i| vec![10.0 * i as f64 / 19.0]).collect();
    let xh = stratified(3, 0.0, 10.0, &mut rng);
    let xs = stratified(4, 0.0, 10.0, &mut rng);
    let f = |xs: &[Vec<f64>], g: fn(f64) -> f64| -> Vec<f64> { xs.iter().map(|x| g(x[0])).collect() };
    let cfg = FitConfig {
        seed: seeding::substream(seed, "gp-fit"),
        ..FitConfig::default()
    };
    let mf = fit(
        &FidelityDataset::from_rows(1, &xl, &f(&xl, toy_low), &xh, &f(&xh, toy_high)).map_err(err)?,
        &cfg,
    )
    .map_err(err)?;
    let sf = fit(&FidelityDataset::from_rows(1, &[], &[], &xs, &f(&xs, toy_high)).map_err(err)?, &cfg).map_err(err)?;
    let mut t = Table::new(["m", "f_H", "f_L", "sf_mean", "sf_sd", "mf_mean", "mf_sd"]);
    let (mut se_s, mut se_m) = (0.0, 0.0);
    let n = 201;
    for i in 0..n {
        let m = 10.0 * i as f64 / (n - 1) as f64;
        let (ps, pm) = (sf.predict(&[m]).map_err(err)?, mf.predict(&[m]).map_err(err)?);
        se_s += (ps.mean - toy_high(m)).powi(2);
        se_m += (pm.mean - toy_high(m)).powi(2);
        t.push(
            [m, toy_high(m), toy_low(m), ps.mean, ps.sd(), pm.mean, pm.sd()]
                .iter()
                .map(|x| format_real(*x))
                .collect(),
        );
    }
    Ok(Fig1Output {
        table: t.to_csv(),
        rmse_single: (se_s / n as f64).sqrt(),
        rmse_multi: (se_m / n as f64).sqrt(),
    })
}

fn quick_sampler(n_iterations: usize) -> SamplerConfig {
    SamplerConfig {
        n_iterations,
        ..SamplerConfig::default()
    }
}

/// Toy refinement run behind the history figure.
pub fn fig6_config(seed: u64) -> AmfConfig {
    AmfConfig {
        n_low_init: 20,
        n_high_init: 3,
        max_iterations: 20,
        batch_high: 1,
        batch_low: 1,
        sampler: quick_sampler(400),
        refit_starts: 2,
        seed: seeding::substream(seed, "amf"),
        ..AmfConfig::default()
    }
}

/// Diffusion run for one entry of [`FIG9_SCHEDULE`].
pub fn fig9_config(seed: u64, batch: usize, rounds: usize) -> AmfConfig {
    AmfConfig {
        n_low_init: 30,
        n_high_init: 5,
        max_iterations: rounds,
        batch_high: batch,
        batch_low: batch,
        sampler: quick_sampler(400),
        refit_starts: 2,
        seed: seeding::indexed(seeding::substream(seed, "amf"), "batch", batch as u64),
        ..AmfConfig::default()
    }
}

/// Plume run whose `y_s` marginal shows the mirror-image ambiguity.
pub fn bimodal_config(seed: u64) -> AmfConfig {
    AmfConfig {
        n_low_init: 150,
        n_high_init: 20,
        max_iterations: 30,
        batch_high: 1,
        batch_low: 2,
        sampler: SamplerConfig {
            n_chains: 8,
            ..quick_sampler(600)
        },
        final_iterations: Some(2500),
        refit_starts: 1,
        refit_max_iterations: Some(30),
        seed: seeding::substream(seed, "amf"),
        ..AmfConfig::default()
    }
}

fn problem(name: &str, seed: u64) -> Result<(Problem, crate::inference::Measurements), IoError> {
    let p = make_problem(name, &ProblemOverrides::default()).map_err(|e| IoError::Config(e.to_string()))?;
    let meas = p.synthetic_measurements(seed).map_err(|e| IoError::Numerical {
        message: e.to_string(),
        snapshot: None,
    })?;
    Ok((p, meas))
}

fn run(p: &Problem, meas: &crate::inference::Measurements, cfg: &AmfConfig) -> Result<AmfState, IoError> {
    amf_run(&p.pair, &p.prior, meas, cfg)
        .map(|(_, s)| s)
        .map_err(|e| IoError::Numerical {
            message: e.to_string(),
            snapshot: None,
        })
}

fn rmse(p: &Problem, s: &AmfState) -> Result<Vec<f64>, IoError> {
    surrogate_rmse(s, p.pair.high.as_ref(), RMSE_SAMPLES).map_err(|e| IoError::Numerical {
        message: e.to_string(),
        snapshot: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig9Row {
    pub batch: usize,
    pub rounds: usize,
    pub n_high: usize,
    pub n_low: usize,
    pub final_sd: f64,
    pub rmse: f64,
}

/// Batch-size study on the diffusion problem.
pub fn fig9(seed: u64) -> Result<Vec<Fig9Row>, IoError> {
    let (p, meas) = problem("diffusion1d", seed)?;
    FIG9_SCHEDULE
        .iter()
        .map(|&(batch, rounds)| {
            let s = run(&p, &meas, &fig9_config(seed, batch, rounds))?;
            let r = rmse(&p, &s)?;
            Ok(Fig9Row {
                batch,
                rounds,
                n_high: s.eval_counts.0,
                n_low: s.eval_counts.1,
                final_sd: s.history.last().expect("final round").overall_sd(),
                rmse: r.iter().sum::<f64>() / r.len() as f64,
            })
        })
        .collect()
}

/// CSV files of figure `name` as (file name, contents).
pub fn reproduce_figure(name: &str, seed: u64) -> Result<Vec<(String, String)>, IoError> {
    match name {
        "fig1" => {
            let f = fig1(seed)?;
            let mut t = Table::new(["model", "rmse"]);
            t.push(vec!["single-fidelity".into(), format_real(f.rmse_single)]);
            t.push(vec!["multi-fidelity".into(), format_real(f.rmse_multi)]);
            Ok(vec![("fig1_grid.csv".into(), f.table), ("fig1_rmse.csv".into(), t.to_csv())])
        }
        "fig6" => {
            let (p, meas) = problem("toy1d", seed)?;
            let s = run(&p, &meas, &fig6_config(seed))?;
            let mut t = Table::new(["channel", "rmse_vs_high"]);
            for (l, r) in p.pair.labels.iter().zip(rmse(&p, &s)?) {
                t.push(vec![l.clone(), format_real(r)]);
            }
            Ok(vec![
                ("fig6_history.csv".into(), history_csv(&p.pair.labels, &s.history)),
                ("fig6_rmse.csv".into(), t.to_csv()),
            ])
        }
        "fig9" => {
            let mut t = Table::new(["batch_size", "rounds", "n_high", "n_low", "final_mean_sd", "rmse_vs_high"]);
            for r in fig9(seed)? {
                t.push(vec![
                    r.batch.to_string(),
                    r.rounds.to_string(),
                    r.n_high.to_string(),
                    r.n_low.to_string(),
                    format_real(r.final_sd),
                    format_real(r.rmse),
                ]);
            }
            Ok(vec![("fig9_batches.csv".into(), t.to_csv())])
        }
        "example2-bimodal" => {
            let (p, meas) = problem("plume5", seed)?;
            let s = run(&p, &meas, &bimodal_config(seed))?;
            let mut t = Table::new(p.space().names().to_vec());
            for m in &s.posterior_samples {
                t.push(m.iter().map(|x| format_real(*x)).collect());
            }
            let ys: Vec<f64> = s.posterior_samples.iter().map(|m| m[1]).collect();
            let mut modes = Table::new(["y_s_mode"]);
            for m in stats::kde_modes(&ys, BIMODAL_BANDWIDTH, 0.0) {
                modes.push(vec![format_real(m)]);
            }
            Ok(vec![
                ("example2_posterior.csv".into(), t.to_csv()),
                ("example2_ys_modes.csv".into(), modes.to_csv()),
            ])
        }
        other => Err(IoError::Config(format!("unknown figure `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_grid_has_the_documented_columns() {
        let f = fig1(2).unwrap();
        let mut lines = f.table.lines();
        assert_eq!(lines.next().unwrap(), "m,f_H,f_L,sf_mean,sf_sd,mf_mean,mf_sd");
        assert_eq!(lines.count(), 201);
        assert!(f.rmse_multi < f.rmse_single);
    }

    #[test]
    fn stratified_points_fill_their_strata() {
        let mut rng = seeding::rng(1);
        let xs = stratified(4, 0.0, 10.0, &mut rng);
        for (k, x) in xs.iter().enumerate() {
            assert!(x[0] >= 2.5 * k as f64 && x[0] < 2.5 * (k + 1) as f64);
        }
    }

    #[test]
    fn unknown_figures_are_config_errors() {
        assert!(matches!(reproduce_figure("fig2", 0), Err(IoError::Config(_))));
    }
}
