//! CSV tables: UTF-8, comma separated, `.` decimal point, LF line endings, a
//! header row, reals written with 17 significant digits (`{:.16e}`) so they
//! parse back to the identical `f64`.

use std::fmt::Write as _;

use crate::inference::Measurements;
use crate::mcmc::ChainHistory;

use super::IoError;

pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "NaN" | "nan" => Some(f64::NAN),
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

/// A header plus rows of already-formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| IoError::Parse(format!("CSV header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| IoError::Parse(format!("CSV row {}: {e}", i + 1)))?;
            if rec.len() != header.len() {
                return Err(IoError::Parse(format!(
                    "CSV row {} has {} fields, header has {}",
                    i + 1,
                    rec.len(),
                    header.len()
                )));
            }
            rows.push(rec.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize, IoError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::Parse(format!("missing column `{name}`")))
    }
}

fn real_cell(cell: &str, row: usize, col: &str) -> Result<f64, IoError> {
    parse_real(cell).ok_or_else(|| IoError::Parse(format!("row {}: `{cell}` in column `{col}` is not a number", row + 1)))
}

fn int_cell(cell: &str, row: usize, col: &str) -> Result<usize, IoError> {
    cell.parse()
        .map_err(|_| IoError::Parse(format!("row {}: `{cell}` in column `{col}` is not a count", row + 1)))
}

/// Measurements file with columns `label,value,noise_sd`.
pub fn measurements_to_csv(meas: &Measurements) -> String {
    let mut t = Table::new(["label", "value", "noise_sd"]);
    for i in 0..meas.len() {
        t.push(vec![
            meas.labels()[i].clone(),
            format_real(meas.values()[i]),
            format_real(meas.noise_sd()[i]),
        ]);
    }
    t.to_csv()
}

pub fn parse_measurements(text: &str) -> Result<Measurements, IoError> {
    let t = Table::parse(text)?;
    let (l, v, s) = (t.column("label")?, t.column("value")?, t.column("noise_sd")?);
    let mut labels = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    let mut sds = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        labels.push(r[l].clone());
        values.push(real_cell(&r[v], i, "value")?);
        sds.push(real_cell(&r[s], i, "noise_sd")?);
    }
    if values.is_empty() {
        return Err(IoError::Parse("measurements file has no rows".into()));
    }
    Measurements::new(values, sds, labels).map_err(|e| IoError::Parse(e.to_string()))
}

/// Chain traces: `iteration,chain,<parameters...>,log_post`, sorted by
/// (iteration, chain), every iteration listing chains `0..N_c` once.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces {
    pub names: Vec<String>,
    pub history: ChainHistory,
}

pub fn traces_to_csv(names: &[String], history: &ChainHistory, from: usize) -> String {
    let mut header = vec!["iteration".to_string(), "chain".to_string()];
    header.extend(names.iter().cloned());
    header.push("log_post".into());
    let mut t = Table::new(header);
    for k in from..history.n_kept() {
        for (c, (s, lp)) in history.states[k].iter().zip(&history.log_posts[k]).enumerate() {
            let mut row = vec![history.iterations[k].to_string(), c.to_string()];
            row.extend(s.iter().map(|x| format_real(*x)));
            row.push(format_real(*lp));
            t.push(row);
        }
    }
    t.to_csv()
}

pub fn parse_traces(text: &str) -> Result<Traces, IoError> {
    let t = Table::parse(text)?;
    let n = t.header.len();
    if n < 4 || t.header[0] != "iteration" || t.header[1] != "chain" || t.header[n - 1] != "log_post" {
        return Err(IoError::Parse(
            "trace header must be iteration,chain,<parameters...>,log_post with at least one parameter".into(),
        ));
    }
    let names = t.header[2..n - 1].to_vec();
    let mut history = ChainHistory::default();
    let mut i = 0;
    let mut n_chains = None;
    while i < t.rows.len() {
        let it = int_cell(&t.rows[i][0], i, "iteration")?;
        if history.iterations.last().is_some_and(|&last| it <= last) {
            return Err(IoError::Parse(format!("row {}: iterations must increase", i + 1)));
        }
        let mut states = Vec::new();
        let mut log_posts = Vec::new();
        while i < t.rows.len() {
            let r = &t.rows[i];
            if int_cell(&r[0], i, "iteration")? != it {
                break;
            }
            if int_cell(&r[1], i, "chain")? != states.len() {
                return Err(IoError::Parse(format!("row {}: chains must be listed 0, 1, ... per iteration", i + 1)));
            }
            states.push(
                r[2..n - 1]
                    .iter()
                    .zip(&names)
                    .map(|(c, name)| real_cell(c, i, name))
                    .collect::<Result<Vec<f64>, _>>()?,
            );
            log_posts.push(real_cell(&r[n - 1], i, "log_post")?);
            i += 1;
        }
        if *n_chains.get_or_insert(states.len()) != states.len() {
            return Err(IoError::Parse(format!("iteration {it} lists {} chains", states.len())));
        }
        history.push(it, &states, &log_posts);
    }
    Ok(Traces { names, history })
}

/// Writes a header and rows built from reals.
pub fn real_table(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", header.join(","));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| format_real(*x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
