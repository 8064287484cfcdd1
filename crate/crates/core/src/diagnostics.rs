//! Fidelity, conserved quantities, numerical vortex detection and the shared
//! trace format written by every experiment.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{wrap_angle, VortexNode};
use crate::field::WaveField;

/// Normalised overlap |∫ψ_num*ψ_ex dx|² / (∫|ψ_num|²dx ∫|ψ_ex|²dx).
pub fn fidelity(num: &WaveField, ex: &WaveField) -> Result<f64> {
    num.check_compatible(ex)?;
    let overlap: Complex64 = num.values.iter().zip(&ex.values).map(|(a, b)| a.conj() * b).sum();
    let na: f64 = num.values.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = ex.values.iter().map(|z| z.norm_sqr()).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("fidelity of a zero field".into()));
    }
    // dx cancels between numerator and denominator
    Ok((overlap.norm_sqr() / (na * nb)).clamp(0.0, 1.0))
}

/// Rectangle-rule ∫|ψ|²dx.
pub fn conserved_norm(field: &WaveField) -> f64 {
    field.grid.dx() * field.densities().sum::<f64>()
}

/// Spatial mean of |ψ|² and the relative spread (max − min)/mean.
pub fn density_uniformity(field: &WaveField) -> (f64, f64) {
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for d in field.densities() {
        lo = lo.min(d);
        hi = hi.max(d);
        sum += d;
    }
    let mean = sum / field.values.len() as f64;
    let spread = if mean > 0.0 { (hi - lo) / mean } else { 0.0 };
    (mean, spread)
}

/// Largest pointwise deviation ||ψ_num|² − |ψ_ex|²|.
pub fn max_density_deviation(num: &WaveField, ex: &WaveField) -> Result<f64> {
    num.check_compatible(ex)?;
    Ok(num
        .values
        .iter()
        .zip(&ex.values)
        .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
        .fold(0.0, f64::max))
}

/// Scans the (x, t) sample lattice spanned by consecutive snapshots for
/// plaquettes with nonzero phase winding. Space is treated as periodic.
/// Snapshots must share one grid and be ordered in time.
pub fn detect_vortices_numerical(snapshots: &[WaveField]) -> Result<Vec<VortexNode>> {
    let Some(first) = snapshots.first() else {
        return Ok(Vec::new());
    };
    for s in snapshots {
        if s.grid != first.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", s.grid, first.grid)));
        }
    }
    let grid = &first.grid;
    let n = grid.n_points();
    let phases: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| s.values.iter().map(|z| z.im.atan2(z.re)).collect())
        .collect();
    let mut nodes = Vec::new();
    for j in 0..snapshots.len().saturating_sub(1) {
        let (lower, upper) = (&phases[j], &phases[j + 1]);
        for i in 0..n {
            let ip = (i + 1) % n;
            let circ = wrap_angle(lower[ip] - lower[i])
                + wrap_angle(upper[ip] - lower[ip])
                + wrap_angle(upper[i] - upper[ip])
                + wrap_angle(lower[i] - upper[i]);
            let charge = (circ / (2.0 * PI)).round() as i32;
            if charge != 0 {
                nodes.push(VortexNode {
                    x: grid.x(i) + 0.5 * grid.dx(),
                    t: 0.5 * (snapshots[j].t + snapshots[j + 1].t),
                    charge,
                    index: None,
                });
            }
        }
    }
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFlag {
    Ok,
    NonFinite,
}

impl TraceFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceFlag::Ok => "ok",
            TraceFlag::NonFinite => "non-finite",
        }
    }
}

/// One sampled row of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub fidelity: f64,
    pub norm: f64,
    pub mean_density: f64,
    pub spread: f64,
    pub max_density_dev: f64,
    pub flag: TraceFlag,
}

impl TraceSample {
    /// Measures `field` against `reference` (same grid and time).
    pub fn measure(field: &WaveField, reference: &WaveField) -> Result<Self> {
        if !field.is_finite() {
            return Ok(TraceSample {
                t: field.t,
                fidelity: f64::NAN,
                norm: f64::NAN,
                mean_density: f64::NAN,
                spread: f64::NAN,
                max_density_dev: f64::NAN,
                flag: TraceFlag::NonFinite,
            });
        }
        let (mean_density, spread) = density_uniformity(field);
        Ok(TraceSample {
            t: field.t,
            fidelity: fidelity(field, reference)?,
            norm: conserved_norm(field),
            mean_density,
            spread,
            max_density_dev: max_density_deviation(field, reference)?,
            flag: TraceFlag::Ok,
        })
    }
}

/// Time series shared by all evolution experiments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsTrace {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub norm: Vec<f64>,
    pub mean_density: Vec<f64>,
    pub spread: Vec<f64>,
    pub max_density_dev: Vec<f64>,
    pub flags: Vec<TraceFlag>,
    pub blowup_time: Option<f64>,
}

pub const TRACE_COLUMNS: &str = "t,fidelity,norm,mean_density,spread,max_density_dev,flags";

impl DiagnosticsTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, s: TraceSample) {
        self.times.push(s.t);
        self.fidelity.push(s.fidelity);
        self.norm.push(s.norm);
        self.mean_density.push(s.mean_density);
        self.spread.push(s.spread);
        self.max_density_dev.push(s.max_density_dev);
        self.flags.push(s.flag);
        if s.flag == TraceFlag::NonFinite && self.blowup_time.is_none() {
            self.blowup_time = Some(s.t);
        }
    }

    pub fn sample(&self, i: usize) -> TraceSample {
        TraceSample {
            t: self.times[i],
            fidelity: self.fidelity[i],
            norm: self.norm[i],
            mean_density: self.mean_density[i],
            spread: self.spread[i],
            max_density_dev: self.max_density_dev[i],
            flag: self.flags[i],
        }
    }

    pub fn last(&self) -> Option<TraceSample> {
        (!self.is_empty()).then(|| self.sample(self.len() - 1))
    }

    /// Largest relative change of the norm against the first sample.
    pub fn max_norm_drift(&self) -> f64 {
        let Some(&n0) = self.norm.first() else {
            return 0.0;
        };
        self.norm.iter().map(|n| ((n - n0) / n0).abs()).fold(0.0, f64::max)
    }

    /// Sample-wise mean over traces with identical time axes, truncated to
    /// the shortest trace. The earliest blow-up time is kept.
    pub fn mean(traces: &[DiagnosticsTrace]) -> Result<DiagnosticsTrace> {
        let Some(first) = traces.first() else {
            return Ok(DiagnosticsTrace::default());
        };
        let len = traces.iter().map(|t| t.len()).min().unwrap_or(0);
        let mut out = DiagnosticsTrace::default();
        let count = traces.len() as f64;
        for i in 0..len {
            let t = first.times[i];
            if traces.iter().any(|tr| (tr.times[i] - t).abs() > 1e-9 * t.abs().max(1.0)) {
                return Err(Error::GridMismatch("trace time axes differ".into()));
            }
            let avg = |f: fn(&DiagnosticsTrace) -> &Vec<f64>| traces.iter().map(|tr| f(tr)[i]).sum::<f64>() / count;
            let flag = if traces.iter().all(|tr| tr.flags[i] == TraceFlag::Ok) {
                TraceFlag::Ok
            } else {
                TraceFlag::NonFinite
            };
            out.push(TraceSample {
                t,
                fidelity: avg(|tr| &tr.fidelity),
                norm: avg(|tr| &tr.norm),
                mean_density: avg(|tr| &tr.mean_density),
                spread: avg(|tr| &tr.spread),
                max_density_dev: avg(|tr| &tr.max_density_dev),
                flag,
            });
        }
        out.blowup_time = traces
            .iter()
            .filter_map(|t| t.blowup_time)
            .min_by(|a, b| a.total_cmp(b));
        Ok(out)
    }

    /// Writes the trace as CSV; `header` lines are emitted as `# ` comments.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        if let Some(t) = self.blowup_time {
            writeln!(w, "# blowup_time = {t}")?;
        }
        writeln!(w, "{TRACE_COLUMNS}")?;
        for i in 0..self.len() {
            let s = self.sample(i);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.t,
                s.fidelity,
                s.norm,
                s.mean_density,
                s.spread,
                s.max_density_dev,
                s.flag.as_str()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    fn plane(grid: &Grid, q: f64) -> WaveField {
        WaveField::from_fn(grid.clone(), 0.0, |x| Complex64::from_polar(1.0, q * x))
    }

    #[test]
    fn self_and_scaled_fidelity() {
        let g = Grid::new(64, 4.0).unwrap();
        let a = WaveField::from_fn(g.clone(), 0.0, |x| Complex64::new(1.0 + 0.3 * x.cos(), 0.2 * x.sin()));
        assert_relative_eq!(fidelity(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        let mut b = a.clone();
        let c = Complex64::from_polar(2.7, 1.1);
        b.values.iter_mut().for_each(|z| *z *= c);
        assert_relative_eq!(fidelity(&a, &b).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn orthogonal_plane_waves() {
        let g = Grid::new(64, 4.0).unwrap();
        let dq = 2.0 * PI / g.length();
        let f = fidelity(&plane(&g, 3.0 * dq), &plane(&g, 5.0 * dq)).unwrap();
        assert!(f < 1e-28, "{f}");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = plane(&Grid::new(64, 4.0).unwrap(), 0.0);
        let b = plane(&Grid::new(32, 4.0).unwrap(), 0.0);
        assert!(matches!(fidelity(&a, &b), Err(Error::GridMismatch(_))));
        let mut c = a.clone();
        c.t = 1.0;
        assert!(matches!(fidelity(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn uniform_norm_and_spread() {
        let g = Grid::new(32, 4.0).unwrap();
        let mu: f64 = 3.2;
        let f = WaveField::uniform(g, 0.0, Complex64::new(mu.sqrt(), 0.0));
        assert_relative_eq!(conserved_norm(&f), mu * 8.0, max_relative = 1e-14);
        let (mean, spread) = density_uniformity(&f);
        assert_relative_eq!(mean, mu, max_relative = 1e-14);
        assert_eq!(spread, 0.0);
        assert!(detect_vortices_numerical(&[f.clone(), f]).unwrap().is_empty());
    }

    #[test]
    fn trace_mean_keeps_axis() {
        let mut a = DiagnosticsTrace::default();
        let mut b = DiagnosticsTrace::default();
        for i in 0..3 {
            let s = TraceSample {
                t: i as f64,
                fidelity: 1.0,
                norm: 2.0,
                mean_density: 1.0,
                spread: 0.0,
                max_density_dev: 0.0,
                flag: TraceFlag::Ok,
            };
            a.push(s);
            b.push(TraceSample { fidelity: 0.5, ..s });
        }
        let m = DiagnosticsTrace::mean(&[a, b]).unwrap();
        assert_eq!(m.len(), 3);
        assert_relative_eq!(m.fidelity[2], 0.75);
    }
}
