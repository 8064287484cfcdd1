//! Strang split-step integrator for the driven GP equation
//!
//! ```text
//! iψ_t = −½ψ_xx + [g1d|ψ|² + V(x,t)]ψ,
//! V(x,t) = A(t)[cos²kx + (V1/V0)cos kx cos ωt]
//! ```
//!
//! on a periodic grid. Each step applies half a local phase rotation with the
//! potential frozen at the interval midpoint, the exact kinetic flow in Fourier
//! space, and the second half rotation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsTrace, TraceSample};
use crate::error::{Error, Result};
use crate::field::{ReferenceState, WaveField};
use crate::grid::{Grid, Spectral};
use crate::params::FloquetParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    LinearUp,
    LinearDown,
}

/// Amplitude A(t) of the external potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    pub kind: ScheduleKind,
    pub t_ramp: f64,
    pub a_start: f64,
    pub a_end: f64,
}

impl RampSchedule {
    pub fn constant(a: f64) -> Self {
        RampSchedule {
            kind: ScheduleKind::Constant,
            t_ramp: 0.0,
            a_start: a,
            a_end: a,
        }
    }

    /// A grows linearly from 0 to `a_end` over `t_ramp`.
    pub fn linear_up(a_end: f64, t_ramp: f64) -> Self {
        RampSchedule {
            kind: ScheduleKind::LinearUp,
            t_ramp,
            a_start: 0.0,
            a_end,
        }
    }

    /// A decays linearly from `a_start` to 0 over `t_ramp`.
    pub fn linear_down(a_start: f64, t_ramp: f64) -> Self {
        RampSchedule {
            kind: ScheduleKind::LinearDown,
            t_ramp,
            a_start,
            a_end: 0.0,
        }
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.a_end,
            ScheduleKind::LinearUp | ScheduleKind::LinearDown => {
                if t >= self.t_ramp {
                    self.a_end
                } else if t <= 0.0 {
                    self.a_start
                } else {
                    self.a_start + (self.a_end - self.a_start) * (t / self.t_ramp)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.t_ramp, self.a_start, self.a_end];
        if vals.iter().any(|v| !v.is_finite()) || self.t_ramp < 0.0 {
            return Err(Error::InvalidArgument(format!("bad ramp schedule {self:?}")));
        }
        match self.kind {
            ScheduleKind::Constant if self.a_start != self.a_end => Err(Error::InvalidArgument(
                "constant schedule needs a_start == a_end".into(),
            )),
            ScheduleKind::LinearUp if self.a_end.abs() < self.a_start.abs() => Err(Error::InvalidArgument(
                "linear-up schedule must increase |A|".into(),
            )),
            ScheduleKind::LinearDown if self.a_end.abs() > self.a_start.abs() => Err(Error::InvalidArgument(
                "linear-down schedule must decrease |A|".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Ratio V1/V0 multiplying the drive term; zero without a lattice.
fn drive_ratio(params: &FloquetParams) -> f64 {
    if params.v0() == 0.0 {
        0.0
    } else {
        params.v1() / params.v0()
    }
}

/// V(x,t) = A(t)[cos²kx + (V1/V0)cos kx cos ωt].
pub fn potential(x: f64, t: f64, params: &FloquetParams, schedule: &RampSchedule) -> f64 {
    let c = (params.k() * x).cos();
    let a = schedule.amplitude(t);
    a * (c * c + drive_ratio(params) * c * (params.omega() * t).cos())
}

/// Adds complex Gaussian noise with standard deviation ε·max|ψ| per real
/// component. Deterministic for a given seed.
pub fn add_white_noise(field: &WaveField, epsilon: f64, seed: u64) -> Result<WaveField> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise amplitude must be >= 0, got {epsilon}")));
    }
    let mut out = field.clone();
    if epsilon == 0.0 {
        return Ok(out);
    }
    let sigma = epsilon * field.max_abs();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in out.values.iter_mut() {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *z += Complex64::new(re, im);
    }
    Ok(out)
}

/// Result of [`SplitStepSolver::evolve`]. On failure `field` holds the last
/// finite state and `trace` ends with a flagged sample.
#[derive(Debug)]
pub struct Evolution {
    pub field: WaveField,
    pub trace: DiagnosticsTrace,
    pub failure: Option<Error>,
}

impl Evolution {
    pub fn into_result(self) -> Result<(WaveField, DiagnosticsTrace)> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok((self.field, self.trace)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitStepSolver {
    grid: Grid,
    spectral: Spectral,
    params: FloquetParams,
    schedule: RampSchedule,
    cos_kx: Vec<f64>,
    kinetic: Vec<Complex64>,
    kinetic_dt: f64,
}

impl SplitStepSolver {
    pub fn new(grid: Grid, params: FloquetParams, schedule: RampSchedule) -> Result<Self> {
        schedule.validate()?;
        if params.v0() == 0.0 && schedule.kind != ScheduleKind::Constant {
            return Err(Error::InvalidArgument(
                "a ramped potential needs V0 != 0 to fix the drive ratio V1/V0".into(),
            ));
        }
        grid.check_commensurate(params.k())?;
        let spectral = Spectral::new(&grid);
        let cos_kx = grid.points().map(|x| (params.k() * x).cos()).collect();
        Ok(SplitStepSolver {
            grid,
            spectral,
            params,
            schedule,
            cos_kx,
            kinetic: Vec::new(),
            kinetic_dt: f64::NAN,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &FloquetParams {
        &self.params
    }

    pub fn schedule(&self) -> &RampSchedule {
        &self.schedule
    }

    /// Potential sampled on the grid at time t.
    pub fn potential_on_grid(&self, t: f64) -> Vec<f64> {
        let a = self.schedule.amplitude(t);
        let drive = drive_ratio(&self.params) * (self.params.omega() * t).cos();
        self.cos_kx.iter().map(|&c| a * (c * c + drive * c)).collect()
    }

    fn local_rotation(&self, values: &mut [Complex64], potential: &[f64], half_dt: f64) {
        let g = self.params.g1d();
        for (z, &v) in values.iter_mut().zip(potential) {
            let angle = -(g * z.norm_sqr() + v) * half_dt;
            *z *= Complex64::from_polar(1.0, angle);
        }
    }

    fn kinetic_factors(&mut self, dt: f64) -> &[Complex64] {
        if self.kinetic_dt != dt {
            self.kinetic = self
                .grid
                .wavenumbers()
                .iter()
                .map(|&q| Complex64::from_polar(1.0, -0.5 * q * q * dt))
                .collect();
            self.kinetic_dt = dt;
        }
        &self.kinetic
    }

    /// Advances `field` by one Strang step of size `dt` (negative steps run
    /// backwards in time).
    pub fn step(&mut self, field: &mut WaveField, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!("step size must be finite and nonzero, got {dt}")));
        }
        if field.grid != self.grid {
            return Err(Error::GridMismatch(format!("field on {}, solver on {}", field.grid, self.grid)));
        }
        let v_mid = self.potential_on_grid(field.t + 0.5 * dt);
        self.local_rotation(&mut field.values, &v_mid, 0.5 * dt);
        self.spectral.forward(&mut field.values);
        let factors = self.kinetic_factors(dt);
        for (z, f) in field.values.iter_mut().zip(factors) {
            *z *= f;
        }
        self.spectral.inverse(&mut field.values);
        self.local_rotation(&mut field.values, &v_mid, 0.5 * dt);
        field.t += dt;
        if !field.is_finite() {
            return Err(Error::NonFiniteField { t: field.t });
        }
        Ok(())
    }

    /// Steps from `field.t` to `t_end` without diagnostics.
    pub fn advance(&mut self, mut field: WaveField, t_end: f64, dt: f64) -> Result<WaveField> {
        let t0 = field.t;
        let span = t_end - t0;
        if !(dt.is_finite() && dt != 0.0) || span * dt < 0.0 || !span.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot advance from t = {t0} to {t_end} with dt = {dt}"
            )));
        }
        let n_steps = ((span / dt) - 1e-9).ceil().max(0.0) as usize;
        for i in 0..n_steps {
            let t_next = if i + 1 == n_steps { t_end } else { t0 + (i + 1) as f64 * dt };
            let h = t_next - field.t;
            self.step(&mut field, h)?;
            field.t = t_next;
        }
        Ok(field)
    }

    /// Steps from `field.t` to `t_end` with step `dt` (the last step is
    /// shortened to land on `t_end`), sampling the trace against `reference`
    /// every `sample_interval` and at both ends. `observer` sees every sampled
    /// field.
    pub fn evolve(
        &mut self,
        field: WaveField,
        t_end: f64,
        dt: f64,
        sample_interval: Option<f64>,
        reference: &dyn ReferenceState,
        mut observer: Option<&mut dyn FnMut(&WaveField)>,
    ) -> Evolution {
        let mut trace = DiagnosticsTrace::default();
        let t0 = field.t;
        let span = t_end - t0;
        if !(dt.is_finite() && dt != 0.0) || span * dt < 0.0 || !span.is_finite() {
            let failure = Error::InvalidArgument(format!("cannot evolve from t = {t0} to {t_end} with dt = {dt}"));
            return Evolution {
                field,
                trace,
                failure: Some(failure),
            };
        }
        let n_steps = ((span / dt) - 1e-9).ceil().max(0.0) as usize;
        let every = sample_interval
            .map(|s| ((s / dt.abs()).round() as usize).max(1))
            .unwrap_or(usize::MAX);

        let record = |f: &WaveField, trace: &mut DiagnosticsTrace| -> Result<()> {
            let reference = reference.sample(&f.grid, f.t);
            trace.push(TraceSample::measure(f, &reference)?);
            Ok(())
        };
        let mut current = field;
        if let Err(e) = record(&current, &mut trace) {
            return Evolution {
                field: current,
                trace,
                failure: Some(e),
            };
        }
        if let Some(obs) = observer.as_mut() {
            obs(&current);
        }
        for i in 0..n_steps {
            let t_next = if i + 1 == n_steps { t_end } else { t0 + (i + 1) as f64 * dt };
            let h = t_next - current.t;
            let mut next = current.clone();
            let stepped = self.step(&mut next, h);
            next.t = t_next;
            if let Err(e) = stepped {
                if matches!(e, Error::NonFiniteField { .. }) {
                    let _ = record(&next, &mut trace);
                }
                return Evolution {
                    field: current,
                    trace,
                    failure: Some(e),
                };
            }
            current = next;
            let last = i + 1 == n_steps;
            if last || (i + 1) % every == 0 {
                if let Err(e) = record(&current, &mut trace) {
                    return Evolution {
                        field: current,
                        trace,
                        failure: Some(e),
                    };
                }
                if let Some(obs) = observer.as_mut() {
                    obs(&current);
                }
            }
        }
        Evolution {
            field: current,
            trace,
            failure: None,
        }
    }
}
