use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Complex wavefunction samples on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub t: f64,
    pub values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid, t: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(WaveField { grid, t, values })
    }

    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().map(f).collect();
        WaveField { grid, t, values }
    }

    pub fn uniform(grid: Grid, t: f64, value: Complex64) -> Self {
        let values = vec![value; grid.n_points()];
        WaveField { grid, t, values }
    }

    pub fn densities(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|z| z.norm_sqr())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Checks that `other` lives on the same grid at the same time.
    pub fn check_compatible(&self, other: &WaveField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", self.grid, other.grid)));
        }
        let tol = 1e-9 * self.t.abs().max(1.0);
        if (self.t - other.t).abs() > tol {
            return Err(Error::GridMismatch(format!("t = {} vs t = {}", self.t, other.t)));
        }
        Ok(())
    }
}

/// A state that can be sampled on any grid at any time, used as the
/// comparison target of fidelity traces.
pub trait ReferenceState: Sync {
    fn sample(&self, grid: &Grid, t: f64) -> WaveField;
}

/// Uniform state √(μ/g)·e^{i(θ0 − μt)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformState {
    pub mu: f64,
    pub g1d: f64,
    pub theta0: f64,
}

impl UniformState {
    pub fn amplitude(&self) -> f64 {
        (self.mu / self.g1d).max(0.0).sqrt()
    }

    pub fn psi(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude(), self.theta0 - self.mu * t)
    }
}

impl ReferenceState for UniformState {
    fn sample(&self, grid: &Grid, t: f64) -> WaveField {
        WaveField::uniform(grid.clone(), t, self.psi(t))
    }
}
