//! Groundwater contaminant-plume simulators: steady Darcy flow followed by
//! advective-dispersive transport, sampled at observation wells.

use std::sync::Arc;

use super::{
    simulate, solve_flow, Dispersivity, FlowBoundary, FlowField, Grid, GridField, KlBasis, ModelError, Simulator,
    SourceSpec,
};

/// Domain extent shared by all plume problems.
pub const DOMAIN: (f64, f64) = (20.0, 10.0);

/// Five-parameter source `(x_s, y_s, S_s, t_on, t_off)` in a fixed flow field.
#[derive(Debug, Clone)]
pub struct PlumeSimulator {
    flow: Arc<FlowField>,
    wells: Vec<(f64, f64)>,
    times: Vec<f64>,
}

impl PlumeSimulator {
    pub fn uniform(nx: usize, ny: usize, conductivity: f64, wells: Vec<(f64, f64)>, times: Vec<f64>) -> Result<Self, ModelError> {
        let g = Grid::new(nx, ny, DOMAIN.0, DOMAIN.1)?;
        let flow = solve_flow(&GridField::constant(g, conductivity), &FlowBoundary::default())?;
        Ok(Self {
            flow: Arc::new(flow),
            wells,
            times,
        })
    }

    pub fn flow(&self) -> &FlowField {
        &self.flow
    }
}

impl Simulator for PlumeSimulator {
    fn n_outputs(&self) -> usize {
        self.wells.len() * self.times.len()
    }

    /// Outputs ordered time-major, wells within each time.
    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError> {
        let &[x, y, rate, t_on, t_off] = m else {
            return Err(ModelError::DimensionMismatch {
                expected: 5,
                found: m.len(),
            });
        };
        let src = SourceSpec {
            x,
            y,
            schedule: vec![(t_on, t_off, rate)],
        };
        let r = simulate(&self.flow, Dispersivity::default(), &src, &self.wells, &self.times)?;
        Ok(r.concentrations.into_iter().flatten().collect())
    }
}

/// Source location, six unit-interval strengths and `N_KL` log-conductivity
/// coefficients. Outputs are concentrations (time-major) followed by heads.
#[derive(Debug, Clone)]
pub struct PlumeKlSimulator {
    basis: Arc<KlBasis>,
    grid: Grid,
    wells: Vec<(f64, f64)>,
    times: Vec<f64>,
}

/// Number of source parameters before the KL coefficients.
pub const KL_SOURCE_PARAMS: usize = 8;

impl PlumeKlSimulator {
    pub fn new(basis: Arc<KlBasis>, nx: usize, ny: usize, wells: Vec<(f64, f64)>, times: Vec<f64>) -> Result<Self, ModelError> {
        let grid = Grid::new(nx, ny, DOMAIN.0, DOMAIN.1)?;
        Ok(Self {
            basis,
            grid,
            wells,
            times,
        })
    }

    /// Conductivity on this simulator's grid for the given KL coefficients.
    pub fn conductivity(&self, xi: &[f64]) -> Result<GridField, ModelError> {
        Ok(self.basis.field(xi)?.resample(self.grid)?.map(f64::exp))
    }
}

impl Simulator for PlumeKlSimulator {
    fn n_outputs(&self) -> usize {
        self.wells.len() * (self.times.len() + 1)
    }

    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>, ModelError> {
        let expected = KL_SOURCE_PARAMS + self.basis.spec.n_terms;
        if m.len() != expected {
            return Err(ModelError::DimensionMismatch {
                expected,
                found: m.len(),
            });
        }
        let flow = solve_flow(&self.conductivity(&m[KL_SOURCE_PARAMS..])?, &FlowBoundary::default())?;
        let src = SourceSpec {
            x: m[0],
            y: m[1],
            schedule: (0..6).map(|i| (1.0 + i as f64, 2.0 + i as f64, m[2 + i])).collect(),
        };
        let r = simulate(&flow, Dispersivity::default(), &src, &self.wells, &self.times)?;
        let mut out: Vec<f64> = r.concentrations.into_iter().flatten().collect();
        out.extend(self.wells.iter().map(|&(x, y)| self.grid.sample(&flow.head, x, y)));
        Ok(out)
    }
}
