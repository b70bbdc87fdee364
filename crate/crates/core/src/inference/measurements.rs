use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasurementError {
    #[error("measurement vectors differ in length ({values} values, {noise} noise sds, {labels} labels)")]
    LengthMismatch { values: usize, noise: usize, labels: usize },
    #[error("noise sd of observation {0} must be positive and finite")]
    BadNoise(usize),
    #[error("observation {0} is not finite")]
    NonFinite(usize),
}

/// Observed data `d` with independent Gaussian noise per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    values: Vec<f64>,
    noise_sd: Vec<f64>,
    labels: Vec<String>,
}

impl Measurements {
    pub fn new(values: Vec<f64>, noise_sd: Vec<f64>, labels: Vec<String>) -> Result<Self, MeasurementError> {
        if values.len() != noise_sd.len() || values.len() != labels.len() {
            return Err(MeasurementError::LengthMismatch {
                values: values.len(),
                noise: noise_sd.len(),
                labels: labels.len(),
            });
        }
        if let Some(i) = noise_sd.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(MeasurementError::BadNoise(i));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeasurementError::NonFinite(i));
        }
        Ok(Self { values, noise_sd, labels })
    }

    /// Unlabelled observations (labels `d0`, `d1`, ...).
    pub fn unlabelled(values: Vec<f64>, noise_sd: Vec<f64>) -> Result<Self, MeasurementError> {
        let labels = (0..values.len()).map(|i| format!("d{i}")).collect();
        Self::new(values, noise_sd, labels)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sd(&self) -> &[f64] {
        &self.noise_sd
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}
