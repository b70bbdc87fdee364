//! Box-bounded parameter spaces (uniform priors).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("parameter space needs at least one dimension")]
    Empty,
    #[error("names, lower and upper bounds have different lengths ({names}, {lower}, {upper})")]
    LengthMismatch {
        names: usize,
        lower: usize,
        upper: usize,
    },
    #[error("bounds for `{name}` are not ordered: lower {lower} >= upper {upper}")]
    Unordered { name: String, lower: f64, upper: f64 },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
}

/// Named parameters with independent uniform priors on `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct ParameterSpace {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawSpace> for ParameterSpace {
    type Error = SpaceError;
    fn try_from(raw: RawSpace) -> Result<Self, Self::Error> {
        ParameterSpace::new(raw.names, raw.lower, raw.upper)
    }
}

impl From<ParameterSpace> for RawSpace {
    fn from(s: ParameterSpace) -> Self {
        RawSpace {
            names: s.names,
            lower: s.lower,
            upper: s.upper,
        }
    }
}

impl ParameterSpace {
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SpaceError> {
        if names.len() != lower.len() || names.len() != upper.len() {
            return Err(SpaceError::LengthMismatch {
                names: names.len(),
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        if names.is_empty() {
            return Err(SpaceError::Empty);
        }
        for (i, name) in names.iter().enumerate() {
            // NaN bounds fail this comparison too.
            if !(lower[i] < upper[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(SpaceError::Unordered {
                    name: name.clone(),
                    lower: lower[i],
                    upper: upper[i],
                });
            }
            if names[..i].contains(name) {
                return Err(SpaceError::DuplicateName(name.clone()));
            }
        }
        Ok(Self { names, lower, upper })
    }

    /// Convenience constructor from `(name, lower, upper)` triples.
    pub fn from_bounds<S: Into<String>>(bounds: impl IntoIterator<Item = (S, f64, f64)>) -> Result<Self, SpaceError> {
        let mut names = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (n, lo, hi) in bounds {
            names.push(n.into());
            lower.push(lo);
            upper.push(hi);
        }
        Self::new(names, lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Inclusive box membership. Wrong-length vectors are never inside.
    pub fn contains(&self, m: &[f64]) -> bool {
        m.len() == self.dim()
            && m.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    /// Folds every coordinate back into the box by mirror reflection at the bounds.
    pub fn reflect(&self, m: &mut [f64]) {
        for (x, (&lo, &hi)) in m.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = reflect_into(*x, lo, hi);
        }
    }
}

/// Mirror-reflects `x` into `[lo, hi]`; repeated folds handle overshoots larger than the width.
pub fn reflect_into(x: f64, lo: f64, hi: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    if x >= lo && x <= hi {
        return x;
    }
    let w = hi - lo;
    let period = 2.0 * w;
    let mut r = (x - lo) % period;
    if r < 0.0 {
        r += period;
    }
    let y = if r <= w { lo + r } else { hi - (r - w) };
    y.clamp(lo, hi)
}
