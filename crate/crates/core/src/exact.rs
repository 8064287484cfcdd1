//! Closed-form Floquet state of the balanced system and its derived fields.
//!
//! The state is ψ(x,t) = u(x,t)·e^{−i·EF·t} with the drive-periodic amplitude
//!
//! ```text
//! u(x,t) = √(EF/g1d) − s·√(−V0/g1d)·cos(kx)·e^{−iωt},   s = sign(g1d)·α
//! ```
//!
//! With this sign |ψ|² = (EF − V0cos²kx − V1cos kx cos ωt)/g1d, so
//! g1d|ψ|² + V = EF holds for V = V0cos²kx + V1cos kx cos ωt. Every derived
//! field (phase, gradients, node positions, stability coefficients) is computed
//! from u and its exact derivatives.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ReferenceState, WaveField};
use crate::grid::{Grid, Spectral};
use crate::params::{classify_region, Branch, FloquetParams, RegionClass};

/// Densities below this fraction of the density scale count as nodes.
pub const NODE_DENSITY_RTOL: f64 = 1e-13;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Removes 2π jumps from a sequence of angles in place.
pub fn unwrap_phases(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let step = wrap_angle(phases[i] - phases[i - 1]);
        phases[i] = phases[i - 1] + step;
    }
}

/// Phase of the state at one point; undefined on zero-density nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseValue {
    Defined(f64),
    Undefined,
}

impl PhaseValue {
    pub fn value(self) -> Option<f64> {
        match self {
            PhaseValue::Defined(v) => Some(v),
            PhaseValue::Undefined => None,
        }
    }
}

impl fmt::Display for PhaseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseValue::Defined(v) => write!(f, "{v}"),
            PhaseValue::Undefined => f.write_str("undefined"),
        }
    }
}

/// Phase gradient θ_x; divergent on nodes where sin(kx) ≠ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientValue {
    Finite(f64),
    Divergent,
}

impl GradientValue {
    pub fn value(self) -> Option<f64> {
        match self {
            GradientValue::Finite(v) => Some(v),
            GradientValue::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, GradientValue::Divergent)
    }
}

impl fmt::Display for GradientValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradientValue::Finite(v) => write!(f, "{v}"),
            GradientValue::Divergent => f.write_str("divergent"),
        }
    }
}

/// Whether the −EF·t contribution is kept in the phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseConvention {
    #[default]
    Full,
    FloquetFactorRemoved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeIndex {
    pub n: u32,
    pub l: i64,
    pub branch: Branch,
}

/// Zero-density point in the (x, t) plane with its winding charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VortexNode {
    pub x: f64,
    pub t: f64,
    pub charge: i32,
    /// Closed-form labels; `None` for nodes found numerically.
    pub index: Option<NodeIndex>,
}

/// Amplitude u and its exact first/second derivatives at one point.
#[derive(Debug, Clone, Copy)]
struct Local {
    u: Complex64,
    u_x: Complex64,
    u_xx: Complex64,
    u_t: Complex64,
    u_tt: Complex64,
}

/// Coefficient fields of the stability operators at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub r: f64,
    pub r2: f64,
    pub r_t: f64,
    pub theta_x: f64,
    pub theta_xx: f64,
    pub theta_t: f64,
}

/// Rectangular loop used for circulation measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingLoop {
    pub half_width_x: f64,
    pub half_width_t: f64,
    pub samples_per_side: usize,
}

impl WindingLoop {
    pub fn default_for(params: &FloquetParams) -> Self {
        WindingLoop {
            half_width_x: 0.1 / params.k(),
            half_width_t: 0.1 / params.omega(),
            samples_per_side: 400,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        WindingLoop {
            half_width_x: self.half_width_x * factor,
            half_width_t: self.half_width_t * factor,
            ..self
        }
    }
}

/// One row of a field map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x: f64,
    pub t: f64,
    pub psi: Complex64,
    pub density: f64,
    pub phase: PhaseValue,
    pub phase_gradient: GradientValue,
    pub flow_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactState {
    params: FloquetParams,
    background: f64,
    wave: f64,
}

impl ExactState {
    pub fn new(params: FloquetParams) -> Result<Self> {
        params.validate()?;
        let g = params.g1d();
        let background = (params.ef() / g).max(0.0).sqrt();
        let wave = g.signum() * params.alpha().sign() * (-params.v0() / g).max(0.0).sqrt();
        Ok(ExactState {
            params,
            background,
            wave,
        })
    }

    pub fn params(&self) -> &FloquetParams {
        &self.params
    }

    pub fn region(&self) -> RegionClass {
        classify_region(&self.params)
    }

    fn density_scale(&self) -> f64 {
        let p = &self.params;
        (p.ef().abs() + p.v0().abs() + p.v1().abs()) / p.g1d().abs()
    }

    fn is_node_density(&self, r2: f64) -> bool {
        r2 <= NODE_DENSITY_RTOL * self.density_scale()
    }

    fn local(&self, x: f64, t: f64) -> Local {
        let p = &self.params;
        let (k, w) = (p.k(), p.omega());
        let (s, c) = (k * x).sin_cos();
        let drive = Complex64::from_polar(1.0, -w * t);
        let b = self.wave;
        // u = a − b·c·e^{−iωt}
        let u = Complex64::new(self.background, 0.0) - drive * (b * c);
        let u_x = drive * (b * k * s);
        let u_xx = drive * (b * k * k * c);
        let u_t = drive * Complex64::new(0.0, w * b * c);
        let u_tt = drive * (w * w * b * c);
        Local {
            u,
            u_x,
            u_xx,
            u_t,
            u_tt,
        }
    }

    /// Drive-periodic amplitude u(x,t), i.e. ψ with the Floquet factor removed.
    pub fn amplitude(&self, x: f64, t: f64) -> Complex64 {
        self.local(x, t).u
    }

    pub fn psi(&self, x: f64, t: f64) -> Complex64 {
        self.amplitude(x, t) * self.floquet_factor(t)
    }

    pub fn floquet_factor(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, -self.params.ef() * t)
    }

    /// ∂ψ/∂t evaluated analytically.
    pub fn psi_dt(&self, x: f64, t: f64) -> Complex64 {
        let l = self.local(x, t);
        (l.u_t - Complex64::new(0.0, self.params.ef()) * l.u) * self.floquet_factor(t)
    }

    /// ∂²ψ/∂x² evaluated analytically.
    pub fn psi_dxx(&self, x: f64, t: f64) -> Complex64 {
        self.local(x, t).u_xx * self.floquet_factor(t)
    }

    /// External potential V0cos²kx + V1cos kx cos ωt.
    pub fn potential(&self, x: f64, t: f64) -> f64 {
        let p = &self.params;
        let c = (p.k() * x).cos();
        p.v0() * c * c + p.v1() * c * (p.omega() * t).cos()
    }

    /// Atom-number density R² = (EF − V0cos²kx − V1cos kx cos ωt)/g1d.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        let p = &self.params;
        let c = (p.k() * x).cos();
        let r2 = (p.ef() - p.v0() * c * c - p.v1() * c * (p.omega() * t).cos()) / p.g1d();
        r2.max(0.0)
    }

    /// Wrapped phase arg ψ (or arg u when the Floquet term is removed).
    pub fn phase(&self, x: f64, t: f64, convention: PhaseConvention) -> PhaseValue {
        if self.is_node_density(self.density(x, t)) {
            return PhaseValue::Undefined;
        }
        let u = self.amplitude(x, t);
        let theta = u.im.atan2(u.re);
        match convention {
            PhaseConvention::FloquetFactorRemoved => PhaseValue::Defined(theta),
            PhaseConvention::Full => PhaseValue::Defined(theta - self.params.ef() * t),
        }
    }

    /// Phase at fixed x along increasing `times`, lifted to a continuous
    /// branch. Node samples stay `Undefined` and unwrapping resumes after them.
    pub fn phase_along_time(&self, x: f64, times: &[f64], convention: PhaseConvention) -> Vec<PhaseValue> {
        let mut out = Vec::with_capacity(times.len());
        let mut last_raw: Option<f64> = None;
        let mut last_lifted = 0.0;
        for &t in times {
            let u = self.amplitude(x, t);
            if self.is_node_density(self.density(x, t)) {
                out.push(PhaseValue::Undefined);
                continue;
            }
            let raw = u.im.atan2(u.re);
            let lifted = match last_raw {
                None => raw,
                Some(prev) => last_lifted + wrap_angle(raw - prev),
            };
            last_raw = Some(raw);
            last_lifted = lifted;
            let value = match convention {
                PhaseConvention::FloquetFactorRemoved => lifted,
                PhaseConvention::Full => lifted - self.params.ef() * t,
            };
            out.push(PhaseValue::Defined(value));
        }
        out
    }

    /// θ_x = −k·V1·sin(kx)·sin(ωt)/(2·g1d·R²).
    pub fn phase_gradient(&self, x: f64, t: f64) -> GradientValue {
        let p = &self.params;
        let r2 = self.density(x, t);
        if self.is_node_density(r2) {
            // sin(kx) = 0 lines carry a vanishing numerator for every t
            if (p.k() * x).sin().abs() <= 1e-12 {
                return GradientValue::Finite(0.0);
            }
            return GradientValue::Divergent;
        }
        GradientValue::Finite(self.flow_density(x, t) / r2)
    }

    /// Flow density J = R²θ_x, finite everywhere.
    pub fn flow_density(&self, x: f64, t: f64) -> f64 {
        let p = &self.params;
        -p.k() * p.v1() * (p.k() * x).sin() * (p.omega() * t).sin() / (2.0 * p.g1d())
    }

    /// θ_t = Im(u_t/u) − EF away from nodes.
    pub fn phase_time_derivative(&self, x: f64, t: f64) -> Option<f64> {
        let l = self.local(x, t);
        if self.is_node_density(l.u.norm_sqr()) {
            return None;
        }
        Some((l.u_t / l.u).im - self.params.ef())
    }

    /// Limit of θ_t when approaching a node along t, (u_tt/2u_t) − EF.
    pub fn phase_time_derivative_node_limit(&self, x: f64, t: f64) -> f64 {
        let l = self.local(x, t);
        (l.u_tt / (2.0 * l.u_t)).im - self.params.ef()
    }

    /// Stability-operator coefficients at (x, t). Values blow up near nodes;
    /// callers decide how to treat them.
    pub fn coefficients(&self, x: f64, t: f64) -> Coefficients {
        let l = self.local(x, t);
        let r2 = l.u.norm_sqr();
        let r = r2.sqrt();
        let ratio_x = l.u_x / l.u;
        let ratio_t = l.u_t / l.u;
        Coefficients {
            r,
            r2,
            r_t: r * ratio_t.re,
            theta_x: ratio_x.im,
            theta_xx: (l.u_xx / l.u - ratio_x * ratio_x).im,
            theta_t: ratio_t.im - self.params.ef(),
        }
    }

    /// Closed-form zero-density nodes with t_n = nπ/ω, n ≤ `n_max`, inside
    /// `[x_lo, x_hi)`. Empty outside the phase-jumping region.
    pub fn vortex_nodes(&self, n_max: u32, x_window: (f64, f64)) -> Vec<VortexNode> {
        if self.region() != RegionClass::PhaseJumping {
            return Vec::new();
        }
        let p = &self.params;
        let k = p.k();
        let (lo, hi) = x_window;
        let mut nodes = Vec::new();
        for n in 0..=n_max {
            let sign_n = if n % 2 == 0 { 1.0 } else { -1.0 };
            let cos_target = -p.v1() * sign_n / (2.0 * p.v0());
            if cos_target.abs() >= 1.0 {
                continue;
            }
            let base = cos_target.acos();
            let t = n as f64 * PI / p.omega();
            for branch in [Branch::Plus, Branch::Minus] {
                let offset = branch.sign() * base;
                let l_min = ((lo * k - offset) / (2.0 * PI)).floor() as i64;
                let l_max = ((hi * k - offset) / (2.0 * PI)).ceil() as i64;
                for l in l_min..=l_max {
                    let x = (offset + 2.0 * PI * l as f64) / k;
                    if x < lo || x >= hi {
                        continue;
                    }
                    nodes.push(VortexNode {
                        x,
                        t,
                        charge: self.node_charge(x, t),
                        index: Some(NodeIndex { n, l, branch }),
                    });
                }
            }
        }
        nodes.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.x.total_cmp(&b.x)));
        nodes
    }

    /// Orientation of the map (x, t) → u at a simple zero.
    fn node_charge(&self, x: f64, t: f64) -> i32 {
        let l = self.local(x, t);
        let jacobian = (l.u_x.conj() * l.u_t).im;
        if jacobian > 0.0 {
            1
        } else if jacobian < 0.0 {
            -1
        } else {
            0
        }
    }

    /// Phase accumulated around a counter-clockwise rectangle centred on
    /// (x, t), in units of 2π.
    pub fn circulation(&self, x: f64, t: f64, lp: WindingLoop, convention: PhaseConvention) -> f64 {
        let m = lp.samples_per_side.max(1);
        let (hx, ht) = (lp.half_width_x, lp.half_width_t);
        let corners = [
            (x - hx, t - ht),
            (x + hx, t - ht),
            (x + hx, t + ht),
            (x - hx, t + ht),
        ];
        let arg = |xx: f64, tt: f64| {
            let psi = match convention {
                PhaseConvention::Full => self.psi(xx, tt),
                PhaseConvention::FloquetFactorRemoved => self.amplitude(xx, tt),
            };
            psi.im.atan2(psi.re)
        };
        let mut total = 0.0;
        let mut prev = arg(corners[0].0, corners[0].1);
        for side in 0..4 {
            let (x0, t0) = corners[side];
            let (x1, t1) = corners[(side + 1) % 4];
            for j in 1..=m {
                let f = j as f64 / m as f64;
                let cur = arg(x0 + f * (x1 - x0), t0 + f * (t1 - t0));
                total += wrap_angle(cur - prev);
                prev = cur;
            }
        }
        total / (2.0 * PI)
    }

    /// Integer winding number of the phase around a node.
    pub fn winding_number(&self, node: &VortexNode, lp: WindingLoop) -> Result<i32> {
        self.winding_number_with(node, lp, PhaseConvention::Full)
    }

    pub fn winding_number_with(&self, node: &VortexNode, lp: WindingLoop, convention: PhaseConvention) -> Result<i32> {
        let turns = self.circulation(node.x, node.t, lp, convention);
        let rounded = turns.round();
        if (turns - rounded).abs() > 0.1 {
            return Err(Error::LoopAmbiguous { turns });
        }
        Ok(rounded as i32)
    }

    /// Samples every field on the tensor product of `xs` and `ts`. Rows are
    /// ordered time-major; phases are unwrapped along t at fixed x.
    pub fn field_map(&self, xs: &[f64], ts: &[f64], convention: PhaseConvention) -> Vec<FieldSample> {
        let phases: Vec<Vec<PhaseValue>> = xs
            .iter()
            .map(|&x| self.phase_along_time(x, ts, convention))
            .collect();
        let mut rows = Vec::with_capacity(xs.len() * ts.len());
        for (j, &t) in ts.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                rows.push(FieldSample {
                    x,
                    t,
                    psi: self.psi(x, t),
                    density: self.density(x, t),
                    phase: phases[i][j],
                    phase_gradient: self.phase_gradient(x, t),
                    flow_density: self.flow_density(x, t),
                });
            }
        }
        rows
    }

    /// Relative residual of the GP equation for the sampled state, with the
    /// second derivative taken spectrally on `grid`:
    /// max|iψ_t + ½ψ_xx − (g|ψ|² + V)ψ| / max(|ψ_t| + |½ψ_xx| + |(g|ψ|²+V)ψ|).
    pub fn gp_residual(&self, grid: &Grid, spectral: &Spectral, t: f64) -> f64 {
        let psi: Vec<Complex64> = grid.points().map(|x| self.psi(x, t)).collect();
        let psi_xx = spectral.derivative(&psi, 2);
        let g = self.params.g1d();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (i, x) in grid.points().enumerate() {
            let dt = self.psi_dt(x, t);
            let kinetic = 0.5 * psi_xx[i];
            let local = (g * psi[i].norm_sqr() + self.potential(x, t)) * psi[i];
            let r = Complex64::new(0.0, 1.0) * dt + kinetic - local;
            worst = worst.max(r.norm());
            scale = scale.max(dt.norm() + kinetic.norm() + local.norm());
        }
        worst / scale
    }
}

impl ReferenceState for ExactState {
    fn sample(&self, grid: &Grid, t: f64) -> WaveField {
        WaveField::from_fn(grid.clone(), t, |x| self.psi(x, t))
    }
}
