//! Per-parameter posterior summaries.

use super::tables::{format_real, Table};
use super::IoError;
use crate::stats::{mean, percentile_sorted, sd, sorted};

/// Summary statistics of one parameter. Percentiles interpolate linearly between
/// order statistics at rank `q/100 * (n - 1)`; `sd` uses the `n - 1` denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSummary {
    pub mean: f64,
    pub sd: f64,
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

pub fn summarize(samples: &[Vec<f64>]) -> Result<Vec<ParameterSummary>, IoError> {
    let Some(first) = samples.first() else {
        return Err(IoError::Input("cannot summarize an empty sample".into()));
    };
    Ok((0..first.len())
        .map(|k| {
            let xs: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let s = sorted(&xs);
            ParameterSummary {
                mean: mean(&xs),
                sd: sd(&xs),
                p2_5: percentile_sorted(&s, 2.5),
                p50: percentile_sorted(&s, 50.0),
                p97_5: percentile_sorted(&s, 97.5),
            }
        })
        .collect())
}

/// CSV with columns `parameter,mean,sd,p2.5,p50,p97.5`.
pub fn export_posterior_summary(names: &[String], samples: &[Vec<f64>]) -> Result<String, IoError> {
    let stats = summarize(samples)?;
    let mut t = Table::new(["parameter", "mean", "sd", "p2.5", "p50", "p97.5"]);
    for (name, s) in names.iter().zip(stats) {
        t.push(vec![
            name.clone(),
            format_real(s.mean),
            format_real(s.sd),
            format_real(s.p2_5),
            format_real(s.p50),
            format_real(s.p97_5),
        ]);
    }
    Ok(t.to_csv())
}
