//! Uniform periodic grid on [−x_max, x_max) and FFT-backed spectral
//! derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_points: usize,
    x_max: f64,
    dx: f64,
    wavenumbers: Vec<f64>,
}

impl Grid {
    pub fn new(n_points: usize, x_max: f64) -> Result<Self> {
        if n_points < 4 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 4, got {n_points}"
            )));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::InvalidGrid(format!("x_max must be positive, got {x_max}")));
        }
        let length = 2.0 * x_max;
        let dx = length / n_points as f64;
        let dq = 2.0 * PI / length;
        let half = n_points / 2;
        let wavenumbers = (0..n_points)
            .map(|j| {
                if j < half {
                    dq * j as f64
                } else {
                    dq * (j as f64 - n_points as f64)
                }
            })
            .collect();
        Ok(Grid {
            n_points,
            x_max,
            dx,
            wavenumbers,
        })
    }

    /// Grid whose length must hold a whole number of lattice periods 2π/k.
    pub fn for_lattice(n_points: usize, x_max: f64, k: f64) -> Result<Self> {
        let grid = Grid::new(n_points, x_max)?;
        grid.check_commensurate(k)?;
        Ok(grid)
    }

    pub fn check_commensurate(&self, k: f64) -> Result<()> {
        let periods = self.length() * k / (2.0 * PI);
        if periods < 0.5 || (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "domain length {} holds {periods} lattice periods; must be an integer",
                self.length()
            )));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn length(&self) -> f64 {
        2.0 * self.x_max
    }
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.x_max + self.dx * i as f64
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub fn max_wavenumber(&self) -> f64 {
        PI / self.dx
    }

    /// q_max²·|dt|/2, the largest kinetic phase a split-step update applies in
    /// one step. Values above π fall inside the split-step resonance bands.
    pub fn kinetic_phase_per_step(&self, dt: f64) -> f64 {
        0.5 * self.max_wavenumber().powi(2) * dt.abs()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} points on [-{}, {})", self.n_points, self.x_max, self.x_max)
    }
}

/// Planned forward/inverse transforms for one grid size.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    scale: f64,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("n", &self.wavenumbers.len()).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_points();
        Spectral {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers: grid.wavenumbers().to_vec(),
            scale: 1.0 / n as f64,
        }
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Inverse transform including the 1/n normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        for z in data.iter_mut() {
            *z *= self.scale;
        }
    }

    /// Multiplies the spectrum of `data` by `(iq)^order`, in place.
    pub fn derivative_in_place(&self, data: &mut [Complex64], order: u32) {
        self.forward(data);
        let n = data.len();
        for (j, (z, &q)) in data.iter_mut().zip(&self.wavenumbers).enumerate() {
            // the Nyquist mode has no odd-derivative partner
            if order % 2 == 1 && j == n / 2 {
                *z = Complex64::new(0.0, 0.0);
                continue;
            }
            *z *= Complex64::new(0.0, q).powu(order);
        }
        self.inverse(data);
    }

    pub fn derivative(&self, data: &[Complex64], order: u32) -> Vec<Complex64> {
        let mut out = data.to_vec();
        self.derivative_in_place(&mut out, order);
        out
    }

    pub fn derivative_real(&self, data: &[f64], order: u32) -> Vec<f64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivative_in_place(&mut buf, order);
        buf.into_iter().map(|z| z.re).collect()
    }
}
