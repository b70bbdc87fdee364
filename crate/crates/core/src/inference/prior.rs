use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{ParameterSpace, SpaceError};

/// Box prior, uniform except on listed coordinates, which carry a standard-normal
/// density truncated to the box. Log-densities drop normalizing constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    space: ParameterSpace,
    standard_normal: Vec<usize>,
}

impl Prior {
    pub fn new(space: ParameterSpace, standard_normal: Vec<usize>) -> Result<Self, SpaceError> {
        if let Some(&i) = standard_normal.iter().find(|&&i| i >= space.dim()) {
            return Err(SpaceError::LengthMismatch {
                names: space.dim(),
                lower: i,
                upper: i,
            });
        }
        Ok(Self { space, standard_normal })
    }

    pub fn uniform(space: ParameterSpace) -> Self {
        Self {
            space,
            standard_normal: Vec::new(),
        }
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn standard_normal_dims(&self) -> &[usize] {
        &self.standard_normal
    }

    /// `-inf` outside the box.
    pub fn log_density(&self, m: &[f64]) -> f64 {
        if !self.space.contains(m) {
            return f64::NEG_INFINITY;
        }
        -0.5 * self.standard_normal.iter().map(|&i| m[i] * m[i]).sum::<f64>()
    }

    /// One prior draw. Normal coordinates are redrawn until they land in the box;
    /// a box with almost no normal mass falls back to the uniform coordinate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut m = self.space.sample(rng);
        for &i in &self.standard_normal {
            let (lo, hi) = (self.space.lower()[i], self.space.upper()[i]);
            for _ in 0..10_000 {
                let z: f64 = StandardNormal.sample(rng);
                if z >= lo && z <= hi {
                    m[i] = z;
                    break;
                }
            }
        }
        m
    }
}
