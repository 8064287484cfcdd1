//! Linearised dynamics of perturbations around the exact Floquet state.
//!
//! With ψ = (R + εψ₁)e^{iθ}, θ the full phase of the exact state and
//! ψ₁ = φ + iϕ, the first-order equations read
//!
//! ```text
//! φ_t = L₁ϕ − Sφ,      ϕ_t = −(L₃φ + Sϕ),
//! L_j = −½[∂²_x − θ_x²] + j·g1d·R² + V + θ_t,
//! S   = ½[2θ_x ∂_x + θ_xx].
//! ```
//!
//! Coefficients come from the closed-form state; spatial derivatives are
//! spectral. Time stepping is a fourth-order Runge–Kutta scheme in the
//! interaction picture of the free flow z_t = (i/2)z_xx, z = φ + iϕ, whose
//! factor exp(−iq²h/2) is applied exactly in Fourier space.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactState;
use crate::field::WaveField;
use crate::grid::{Grid, Spectral};
use crate::params::RegionClass;
use crate::solver::{RampSchedule, SplitStepSolver};

/// Real and imaginary parts (φ, ϕ) of a perturbation on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    pub grid: Grid,
    pub t: f64,
    pub phi: Vec<f64>,
    pub vphi: Vec<f64>,
}

impl PerturbationField {
    pub fn zeros(grid: Grid, t: f64) -> Self {
        let n = grid.n_points();
        PerturbationField {
            grid,
            t,
            phi: vec![0.0; n],
            vphi: vec![0.0; n],
        }
    }

    pub fn from_complex(grid: Grid, t: f64, z: &[Complex64]) -> Self {
        PerturbationField {
            grid,
            t,
            phi: z.iter().map(|c| c.re).collect(),
            vphi: z.iter().map(|c| c.im).collect(),
        }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.phi
            .iter()
            .zip(&self.vphi)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }

    /// max over the grid of √(φ² + ϕ²).
    pub fn max_magnitude(&self) -> f64 {
        self.phi
            .iter()
            .zip(&self.vphi)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.phi.iter().zip(&self.vphi).map(|(a, b)| a * a + b * b).sum();
        (s * self.grid.dx()).sqrt()
    }
}

/// Families of initial perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationInit {
    /// Complex Gaussian noise low-pass filtered to |q| ≤ `cutoff`, scaled to
    /// unit maximum magnitude.
    RandomSmooth { seed: u64, cutoff: f64 },
    /// φ = exp(−(x − center)²/width²) on the periodic domain, ϕ = 0.
    GaussianBump { center: f64, width: f64 },
}

impl PerturbationInit {
    pub fn build(&self, grid: &Grid, t: f64) -> Result<PerturbationField> {
        match *self {
            PerturbationInit::RandomSmooth { seed, cutoff } => {
                if !(cutoff > 0.0) {
                    return Err(Error::InvalidArgument(format!("cutoff must be positive, got {cutoff}")));
                }
                let spectral = Spectral::new(grid);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut z: Vec<Complex64> = (0..grid.n_points())
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im)
                    })
                    .collect();
                spectral.forward(&mut z);
                for (c, &q) in z.iter_mut().zip(grid.wavenumbers()) {
                    if q.abs() > cutoff {
                        *c = Complex64::new(0.0, 0.0);
                    }
                }
                spectral.inverse(&mut z);
                let peak = z.iter().map(|c| c.norm()).fold(0.0, f64::max);
                if peak > 0.0 {
                    z.iter_mut().for_each(|c| *c /= peak);
                }
                Ok(PerturbationField::from_complex(grid.clone(), t, &z))
            }
            PerturbationInit::GaussianBump { center, width } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidArgument(format!("bump width must be positive, got {width}")));
                }
                let length = grid.length();
                let phi = grid
                    .points()
                    .map(|x| {
                        let d = (x - center) - length * ((x - center) / length).round();
                        (-(d / width).powi(2)).exp()
                    })
                    .collect();
                Ok(PerturbationField {
                    grid: grid.clone(),
                    t,
                    phi,
                    vphi: vec![0.0; grid.n_points()],
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// Points with R² below this fraction of max R² are singular.
    pub singular_rtol: f64,
    /// Clamp coefficients at singular points instead of failing.
    pub masking: bool,
    /// Amplification max‖ψ₁‖(t)/max‖ψ₁‖(0) that raises the blow-up flag.
    pub blowup_threshold: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            singular_rtol: 1e-6,
            masking: true,
            blowup_threshold: 1e6,
        }
    }
}

/// Coefficient fields on the grid at one time.
#[derive(Debug, Clone)]
pub struct Background {
    pub t: f64,
    pub r: Vec<f64>,
    pub r2: Vec<f64>,
    pub r_t: Vec<f64>,
    pub theta_x: Vec<f64>,
    pub theta_xx: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub potential: Vec<f64>,
    pub masked: Vec<bool>,
}

impl Background {
    pub fn masked_count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSample {
    pub t: f64,
    pub max_norm: f64,
    pub l2_norm: f64,
    pub blown_up: bool,
}

pub const PERTURBATION_COLUMNS: &str = "t,max_norm,l2_norm,flag";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub blown_up: bool,
    pub blowup_time: Option<f64>,
    pub max_amplification: f64,
    /// Largest number of masked grid points seen at any stage.
    pub masked_points: usize,
    pub trace: Vec<PerturbationSample>,
}

impl BlowupReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{PERTURBATION_COLUMNS}")?;
        for s in &self.trace {
            writeln!(
                w,
                "{},{},{},{}",
                s.t,
                s.max_norm,
                s.l2_norm,
                if s.blown_up { "blowup" } else { "ok" }
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StabilityOperators {
    exact: ExactState,
    grid: Grid,
    spectral: Spectral,
    config: StabilityConfig,
}

impl StabilityOperators {
    pub fn new(exact: ExactState, grid: Grid, config: StabilityConfig) -> Result<Self> {
        grid.check_commensurate(exact.params().k())?;
        let spectral = Spectral::new(&grid);
        Ok(StabilityOperators {
            exact,
            grid,
            spectral,
            config,
        })
    }

    pub fn exact(&self) -> &ExactState {
        &self.exact
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &StabilityConfig {
        &self.config
    }

    /// Evaluates the coefficient fields at time t. Singular points are
    /// clamped (θ_x = θ_xx = 0) when masking is on, otherwise an error.
    pub fn background(&self, t: f64) -> Result<Background> {
        let n = self.grid.n_points();
        let mut bg = Background {
            t,
            r: Vec::with_capacity(n),
            r2: Vec::with_capacity(n),
            r_t: Vec::with_capacity(n),
            theta_x: Vec::with_capacity(n),
            theta_xx: Vec::with_capacity(n),
            theta_t: Vec::with_capacity(n),
            potential: Vec::with_capacity(n),
            masked: vec![false; n],
        };
        for x in self.grid.points() {
            let c = self.exact.coefficients(x, t);
            bg.r.push(c.r);
            bg.r2.push(c.r2);
            bg.r_t.push(c.r_t);
            bg.theta_x.push(c.theta_x);
            bg.theta_xx.push(c.theta_xx);
            bg.theta_t.push(c.theta_t);
            bg.potential.push(self.exact.potential(x, t));
        }
        let max_r2 = bg.r2.iter().copied().fold(0.0, f64::max);
        let floor = self.config.singular_rtol * max_r2;
        for i in 0..n {
            let singular = bg.r2[i] < floor
                || !(bg.theta_x[i].is_finite() && bg.theta_xx[i].is_finite() && bg.theta_t[i].is_finite());
            if !singular {
                continue;
            }
            if !self.config.masking {
                return Err(Error::SingularCoefficient { x: self.grid.x(i), t });
            }
            bg.masked[i] = true;
            bg.theta_x[i] = 0.0;
            bg.theta_xx[i] = 0.0;
            if !bg.theta_t[i].is_finite() {
                bg.theta_t[i] = self.exact.phase_time_derivative_node_limit(self.grid.x(i), t);
            }
        }
        Ok(bg)
    }

    fn local_coefficient(&self, bg: &Background, j: u8, i: usize) -> f64 {
        let g = self.exact.params().g1d();
        0.5 * bg.theta_x[i] * bg.theta_x[i] + f64::from(j) * g * bg.r2[i] + bg.potential[i] + bg.theta_t[i]
    }

    pub fn apply_l_with(&self, bg: &Background, j: u8, f: &[f64]) -> Result<Vec<f64>> {
        if j != 1 && j != 3 {
            return Err(Error::InvalidArgument(format!("L_j is defined for j = 1, 3; got {j}")));
        }
        self.check_len(f)?;
        let f_xx = self.spectral.derivative_real(f, 2);
        Ok((0..f.len())
            .map(|i| -0.5 * f_xx[i] + self.local_coefficient(bg, j, i) * f[i])
            .collect())
    }

    pub fn apply_s_with(&self, bg: &Background, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let f_x = self.spectral.derivative_real(f, 1);
        Ok((0..f.len())
            .map(|i| bg.theta_x[i] * f_x[i] + 0.5 * bg.theta_xx[i] * f[i])
            .collect())
    }

    /// L_j f at time t.
    pub fn apply_l(&self, j: u8, f: &[f64], t: f64) -> Result<Vec<f64>> {
        self.apply_l_with(&self.background(t)?, j, f)
    }

    /// S f at time t.
    pub fn apply_s(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        self.apply_s_with(&self.background(t)?, f)
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-point grid",
                f.len(),
                self.grid.n_points()
            )));
        }
        Ok(())
    }

    /// Relative on-grid residuals of L₁R = 0 and R_t + SR = 0 at time t.
    /// Each residual is scaled by the largest pointwise sum of magnitudes of
    /// its terms.
    pub fn background_residuals(&self, t: f64) -> Result<(f64, f64)> {
        let bg = self.background(t)?;
        let g = self.exact.params().g1d();
        let l1r = self.apply_l_with(&bg, 1, &bg.r)?;
        let sr = self.apply_s_with(&bg, &bg.r)?;
        let r_xx = self.spectral.derivative_real(&bg.r, 2);
        let r_x = self.spectral.derivative_real(&bg.r, 1);
        let (mut worst_l, mut scale_l, mut worst_s, mut scale_s) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..bg.r.len() {
            let r = bg.r[i];
            let terms_l = 0.5 * r_xx[i].abs()
                + 0.5 * bg.theta_x[i].powi(2) * r
                + (g * bg.r2[i] * r).abs()
                + (bg.potential[i] * r).abs()
                + (bg.theta_t[i] * r).abs();
            worst_l = worst_l.max(l1r[i].abs());
            scale_l = scale_l.max(terms_l);
            let terms_s = bg.r_t[i].abs() + (bg.theta_x[i] * r_x[i]).abs() + (0.5 * bg.theta_xx[i] * r).abs();
            worst_s = worst_s.max((bg.r_t[i] + sr[i]).abs());
            scale_s = scale_s.max(terms_s);
        }
        Ok((worst_l / scale_l, if scale_s > 0.0 { worst_s / scale_s } else { worst_s }))
    }

    /// Right-hand side without the free kinetic part, in complex form.
    fn nonlinear_rhs(&self, z: &[Complex64], t: f64, masked: &mut usize) -> Result<Vec<Complex64>> {
        let bg = self.background(t)?;
        *masked = (*masked).max(bg.masked_count());
        let z_x = self.spectral.derivative(z, 1);
        Ok((0..z.len())
            .map(|i| {
                let s = bg.theta_x[i] * z_x[i] + 0.5 * bg.theta_xx[i] * z[i];
                let w1 = self.local_coefficient(&bg, 1, i);
                let w3 = self.local_coefficient(&bg, 3, i);
                Complex64::new(w1 * z[i].im - s.re, -w3 * z[i].re - s.im)
            })
            .collect())
    }

    fn free_flow(&self, z: &mut [Complex64], factors: &[Complex64]) {
        self.spectral.forward(z);
        for (c, f) in z.iter_mut().zip(factors) {
            *c *= f;
        }
        self.spectral.inverse(z);
    }

    /// Integrates the linearised system from `p.t` to `t_end` with step `dt`,
    /// stopping early when the blow-up flag is raised. Samples of the
    /// perturbation size are recorded every `sample_interval` (and at both
    /// ends).
    pub fn evolve_perturbation(
        &self,
        p: PerturbationField,
        t_end: f64,
        dt: f64,
        sample_interval: Option<f64>,
    ) -> Result<(PerturbationField, BlowupReport)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if p.grid != self.grid {
            return Err(Error::GridMismatch(format!("perturbation on {}, operators on {}", p.grid, self.grid)));
        }
        let t0 = p.t;
        let n_steps = (((t_end - t0) / dt) - 1e-9).ceil().max(0.0) as usize;
        let every = sample_interval
            .map(|s| ((s / dt).round() as usize).max(1))
            .unwrap_or(usize::MAX);
        let initial = p.max_magnitude();
        let mut masked = 0usize;
        let mut report = BlowupReport {
            blown_up: false,
            blowup_time: None,
            max_amplification: if initial > 0.0 { 1.0 } else { 0.0 },
            masked_points: 0,
            trace: vec![PerturbationSample {
                t: t0,
                max_norm: initial,
                l2_norm: p.l2_norm(),
                blown_up: false,
            }],
        };
        let mut z = p.to_complex();
        let mut t = t0;
        let mut cached_h = f64::NAN;
        let mut half = Vec::new();
        let mut full = Vec::new();
        for step in 0..n_steps {
            let t_next = if step + 1 == n_steps { t_end } else { t0 + (step + 1) as f64 * dt };
            let h = t_next - t;
            if h != cached_h {
                half = self
                    .grid
                    .wavenumbers()
                    .iter()
                    .map(|&q| Complex64::from_polar(1.0, -0.25 * q * q * h))
                    .collect();
                full = half.iter().map(|f| f * f).collect();
                cached_h = h;
            }
            let k1 = self.nonlinear_rhs(&z, t, &mut masked)?;
            let mut a: Vec<Complex64> = z.iter().zip(&k1).map(|(u, k)| u + 0.5 * h * k).collect();
            self.free_flow(&mut a, &half);
            let k2 = self.nonlinear_rhs(&a, t + 0.5 * h, &mut masked)?;
            let mut ez = z.clone();
            self.free_flow(&mut ez, &half);
            let b: Vec<Complex64> = ez.iter().zip(&k2).map(|(u, k)| u + 0.5 * h * k).collect();
            let k3 = self.nonlinear_rhs(&b, t + 0.5 * h, &mut masked)?;
            let mut e2z = ez.clone();
            self.free_flow(&mut e2z, &half);
            let mut ek3 = k3.clone();
            self.free_flow(&mut ek3, &half);
            let c: Vec<Complex64> = e2z.iter().zip(&ek3).map(|(u, k)| u + h * k).collect();
            let k4 = self.nonlinear_rhs(&c, t_next, &mut masked)?;
            let mut e2k1 = k1;
            self.free_flow(&mut e2k1, &full);
            let mut ek23: Vec<Complex64> = k2.iter().zip(&k3).map(|(a, b)| a + b).collect();
            self.free_flow(&mut ek23, &half);
            for i in 0..z.len() {
                z[i] = e2z[i] + (h / 6.0) * (e2k1[i] + 2.0 * ek23[i] + k4[i]);
            }
            t = t_next;

            let current = PerturbationField::from_complex(self.grid.clone(), t, &z);
            let size = current.max_magnitude();
            let amplification = if initial > 0.0 { size / initial } else { 0.0 };
            let blown = !size.is_finite() || amplification > self.config.blowup_threshold;
            if amplification.is_finite() {
                report.max_amplification = report.max_amplification.max(amplification);
            }
            let last = step + 1 == n_steps;
            if blown || last || (step + 1) % every == 0 {
                report.trace.push(PerturbationSample {
                    t,
                    max_norm: size,
                    l2_norm: current.l2_norm(),
                    blown_up: blown,
                });
            }
            if blown {
                report.blown_up = true;
                report.blowup_time = Some(t);
                if !size.is_finite() {
                    report.max_amplification = f64::INFINITY;
                }
                report.masked_points = masked;
                return Ok((current, report));
            }
        }
        report.masked_points = masked;
        Ok((PerturbationField::from_complex(self.grid.clone(), t, &z), report))
    }
}

/// Relative L² deviation at `t_probe` between the linearised evolution of
/// `init` and the finite difference (ψ_pert − ψ)/ε of two full GP runs started
/// from ψ_exact + ε·ψ₁e^{iθ} and ψ_exact, measured in the co-rotating frame.
/// The GP runs use step `dt`, the linear run `dt/4`.
pub fn linearization_consistency(eps: f64, init: &PerturbationField, exact: &ExactState, t_probe: f64, dt: f64) -> Result<f64> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::InvalidArgument("eps must be finite and nonzero".into()));
    }
    if exact.region() != RegionClass::PhaseContinuing {
        return Err(Error::InvalidArgument(format!(
            "linearization check needs phase-continuing parameters, got {}",
            exact.region()
        )));
    }
    let grid = init.grid.clone();
    let params = *exact.params();
    let unit_phase = |f: &WaveField| -> Vec<Complex64> { f.values.iter().map(|z| z / z.norm()).collect() };

    let base = crate::field::ReferenceState::sample(exact, &grid, init.t);
    let phase0 = unit_phase(&base);
    let z0 = init.to_complex();
    let mut perturbed = base.clone();
    for i in 0..perturbed.values.len() {
        perturbed.values[i] += eps * z0[i] * phase0[i];
    }

    let mut solver = SplitStepSolver::new(grid.clone(), params, RampSchedule::constant(params.v0()))?;
    let base_end = solver.advance(base, t_probe, dt)?;
    let pert_end = solver.advance(perturbed, t_probe, dt)?;
    let phase_end = unit_phase(&crate::field::ReferenceState::sample(exact, &grid, t_probe));
    let fd: Vec<Complex64> = (0..grid.n_points())
        .map(|i| (pert_end.values[i] - base_end.values[i]) / eps * phase_end[i].conj())
        .collect();

    let ops = StabilityOperators::new(*exact, grid, StabilityConfig::default())?;
    let (lin, _) = ops.evolve_perturbation(init.clone(), t_probe, dt / 4.0, None)?;
    let lin = lin.to_complex();
    let diff: f64 = fd.iter().zip(&lin).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = lin.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / scale)
}

/// Default initial perturbation localised on the first closed-form node
/// inside the grid, used by blow-up experiments.
pub fn node_bump(exact: &ExactState, grid: &Grid, width: f64) -> Option<PerturbationInit> {
    exact
        .vortex_nodes(0, (-grid.x_max(), grid.x_max()))
        .into_iter()
        .min_by(|a, b| a.x.abs().total_cmp(&b.x.abs()))
        .map(|n| PerturbationInit::GaussianBump { center: n.x, width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_balanced_params, Branch};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const K: f64 = PI / 2.0;

    fn left_ops(n: usize) -> StabilityOperators {
        let p = make_balanced_params(1.0, -0.3 * K, 3.0 * K, K, Branch::Plus).unwrap();
        let ex = ExactState::new(p).unwrap();
        StabilityOperators::new(ex, Grid::for_lattice(n, 4.0, K).unwrap(), StabilityConfig::default()).unwrap()
    }

    #[test]
    fn l1_annihilates_background_amplitude() {
        let ops = left_ops(128);
        let period = ops.exact().params().period();
        let (l1, sr) = ops.background_residuals(0.3 * period).unwrap();
        assert!(l1 < 1e-6, "{l1}");
        assert!(sr < 1e-6, "{sr}");
    }

    #[test]
    fn l3_minus_l1_is_multiplication() {
        let ops = left_ops(64);
        let t = 1.234;
        let bg = ops.background(t).unwrap();
        let f: Vec<f64> = ops.grid().points().map(|x| (0.7 * x).sin() + 0.2).collect();
        let l1 = ops.apply_l_with(&bg, 1, &f).unwrap();
        let l3 = ops.apply_l_with(&bg, 3, &f).unwrap();
        for i in 0..f.len() {
            let expected = 2.0 * bg.r2[i] * f[i];
            assert_relative_eq!(l3[i] - l1[i], expected, max_relative = 1e-12, epsilon = 1e-12);
        }
        assert!(ops.apply_l_with(&bg, 2, &f).is_err());
    }

    #[test]
    fn free_field_reduction() {
        // g1d and V vanish: L_j f = (q²/2 + θ_t) f with θ_t = −EF
        let p = crate::params::FloquetParams::from_components(0.0, 0.0, 0.0, 0.0, K, Branch::Plus);
        let grid = Grid::for_lattice(64, 4.0, K).unwrap();
        let ops = left_ops(64);
        let ef = 0.9;
        let n = grid.n_points();
        let bg = Background {
            t: 0.0,
            r: vec![0.0; n],
            r2: vec![0.0; n],
            r_t: vec![0.0; n],
            theta_x: vec![0.0; n],
            theta_xx: vec![0.0; n],
            theta_t: vec![-ef; n],
            potential: vec![0.0; n],
            masked: vec![false; n],
        };
        let _ = p;
        let q = 3.0 * K;
        let f: Vec<f64> = grid.points().map(|x| (q * x).cos()).collect();
        let l = ops.apply_l_with(&bg, 3, &f).unwrap();
        for i in 0..n {
            assert_relative_eq!(l[i], (0.5 * q * q - ef) * f[i], epsilon = 1e-11);
        }
    }

    #[test]
    fn s_vanishes_at_time_zero_and_on_constants() {
        let ops = left_ops(64);
        let f: Vec<f64> = ops.grid().points().map(|x| x.cos() + 2.0).collect();
        let s0 = ops.apply_s(&f, 0.0).unwrap();
        assert!(s0.iter().all(|v| v.abs() < 1e-12));
        let bg = ops.background(0.77).unwrap();
        let ones = vec![1.0; 64];
        let s = ops.apply_s_with(&bg, &ones).unwrap();
        for i in 0..64 {
            assert_relative_eq!(s[i], 0.5 * bg.theta_xx[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_perturbation_stays_zero() {
        let ops = left_ops(32);
        let p = PerturbationField::zeros(ops.grid().clone(), 0.0);
        let (out, report) = ops.evolve_perturbation(p, 2.0, 0.01, Some(0.5)).unwrap();
        assert!(out.phi.iter().chain(&out.vphi).all(|&v| v == 0.0));
        assert!(!report.blown_up);
    }

    #[test]
    fn singular_points_error_without_masking() {
        let p = make_balanced_params(1.0, -2.0 * K, 0.5 * K, K, Branch::Plus).unwrap();
        let ex = ExactState::new(p).unwrap();
        // x = 0.625 is the grid point closest to the node at x = 2/3, t = 0
        let grid = Grid::for_lattice(64, 4.0, K).unwrap();
        let cfg = StabilityConfig {
            singular_rtol: 1e-2,
            masking: false,
            ..StabilityConfig::default()
        };
        let ops = StabilityOperators::new(ex, grid.clone(), cfg).unwrap();
        let f = vec![1.0; grid.n_points()];
        assert!(matches!(ops.apply_l(1, &f, 0.0), Err(Error::SingularCoefficient { .. })));
        let masked = StabilityOperators::new(ex, grid, StabilityConfig { masking: true, ..cfg }).unwrap();
        let bg = masked.background(0.0).unwrap();
        assert!(bg.masked_count() > 0);
    }

    #[test]
    fn random_init_is_smooth_and_normalised() {
        let grid = Grid::new(64, 4.0).unwrap();
        let p = PerturbationInit::RandomSmooth { seed: 5, cutoff: 2.0 * K }.build(&grid, 0.0).unwrap();
        assert_relative_eq!(p.max_magnitude(), 1.0, epsilon = 1e-14);
        let again = PerturbationInit::RandomSmooth { seed: 5, cutoff: 2.0 * K }.build(&grid, 0.0).unwrap();
        assert_eq!(p, again);
        let bump = PerturbationInit::GaussianBump { center: 3.9, width: 0.3 }.build(&grid, 0.0).unwrap();
        // periodic distance: x = −4 sits 0.1 away from the centre
        assert!(bump.phi[0] > 0.8);
    }
}
