//! One-parameter sine pair: `f_H = sin m`, `f_L = sin m - 0.1 m - 0.1`.

use super::{ModelError, Simulator};

pub fn toy_high(m: f64) -> f64 {
    m.sin()
}

pub fn toy_low(m: f64) -> f64 {
    m.sin() - 0.1 * m - 0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToySimulator {
    pub high: bool,
}

impl Simulator for ToySimulator {
    fn n_outputs(&self) -> usize {
        1
    }

    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError> {
        let &[x] = m else {
            return Err(ModelError::DimensionMismatch {
                expected: 1,
                found: m.len(),
            });
        };
        Ok(vec![if self.high { toy_high(x) } else { toy_low(x) }])
    }
}
