//! Reproducible protocols built from the exact states, the solver and the
//! diagnostics.
//!
//! The `*_protocol`/`*_ensemble`/`region_sweep` functions compute results in
//! memory; [`run_experiment`] runs the protocol selected by an
//! [`ExperimentSpec`] and writes CSV/binary outputs plus a `manifest.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentKind, ExperimentSpec, InitFamily, SnapshotFormat};
use crate::diagnostics::{fidelity, density_uniformity, DiagnosticsTrace};
use crate::error::{Error, Result};
use crate::exact::{ExactState, FieldSample, PhaseConvention, VortexNode};
use crate::field::{ReferenceState, UniformState, WaveField};
use crate::grid::Grid;
use crate::io;
use crate::linear::{linearization_consistency, node_bump, BlowupReport, StabilityConfig, StabilityOperators};
use crate::params::{classify_region, make_balanced_params, Branch, FloquetParams, RegionClass};
use crate::solver::{add_white_noise, RampSchedule, SplitStepSolver};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Field map over x ∈ [−x_max, x_max] (`n_x` points) and t ∈ [0, periods·T]
/// with `samples_per_period` rows per drive period.
pub fn exact_field_map(
    exact: &ExactState,
    x_max: f64,
    n_x: usize,
    periods: f64,
    samples_per_period: u32,
    convention: PhaseConvention,
) -> Vec<FieldSample> {
    let xs = linspace(-x_max, x_max, n_x);
    let n_t = (periods * samples_per_period as f64).round() as usize + 1;
    let ts = linspace(0.0, periods * exact.params().period(), n_t);
    exact.field_map(&xs, &ts, convention)
}

/// One noisy evolution started from ψ_exact(·, 0).
#[derive(Debug)]
pub struct PerturbedRun {
    pub seed: u64,
    pub trace: DiagnosticsTrace,
    pub field: WaveField,
    pub failure: Option<Error>,
}

#[derive(Debug, Clone)]
pub struct EnsembleSettings {
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
}

pub fn perturbed_run(params: &FloquetParams, s: &EnsembleSettings, seed: u64) -> Result<PerturbedRun> {
    let exact = ExactState::new(*params)?;
    let init = add_white_noise(&exact.sample(&s.grid, 0.0), s.epsilon, seed)?;
    let mut solver = SplitStepSolver::new(s.grid.clone(), *params, RampSchedule::constant(params.v0()))?;
    let evo = solver.evolve(init, s.t_end, s.dt, Some(s.sample_interval), &exact, None);
    Ok(PerturbedRun {
        seed,
        trace: evo.trace,
        field: evo.field,
        failure: evo.failure,
    })
}

/// Runs every seed concurrently; results keep the order of `s.seeds`.
pub fn perturbed_ensemble(params: &FloquetParams, s: &EnsembleSettings) -> Result<Vec<PerturbedRun>> {
    s.seeds.par_iter().map(|&seed| perturbed_run(params, s, seed)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Floquet state → uniform state.
    Down,
    /// Uniform state → Floquet state.
    Up,
}

#[derive(Debug, Clone)]
pub struct RampSettings {
    pub direction: Direction,
    pub t_ramp: f64,
    pub t_hold: f64,
    pub theta0: f64,
    pub grid: Grid,
    pub dt: f64,
    pub sample_interval: f64,
}

#[derive(Debug)]
pub struct RampOutcome {
    pub trace: DiagnosticsTrace,
    pub field: WaveField,
    pub final_fidelity: f64,
    pub mean_density: f64,
    pub spread: f64,
}

/// Uniform state with the same mean density as ψ_exact: μ = EF − V0/2.
pub fn matched_uniform_state(params: &FloquetParams, theta0: f64) -> UniformState {
    UniformState {
        mu: params.uniform_chemical_potential(),
        g1d: params.g1d(),
        theta0,
    }
}

/// Linear ramp of the potential amplitude between 0 and V0 followed by a
/// hold. Fidelity is measured against the uniform state (down) or ψ_exact
/// (up) throughout.
pub fn ramp_protocol(params: &FloquetParams, s: &RampSettings) -> Result<RampOutcome> {
    let exact = ExactState::new(*params)?;
    let uniform = matched_uniform_state(params, s.theta0);
    let (init, schedule, target): (WaveField, RampSchedule, &dyn ReferenceState) = match s.direction {
        Direction::Down => (
            exact.sample(&s.grid, 0.0),
            RampSchedule::linear_down(params.v0(), s.t_ramp),
            &uniform,
        ),
        Direction::Up => (
            uniform.sample(&s.grid, 0.0),
            RampSchedule::linear_up(params.v0(), s.t_ramp),
            &exact,
        ),
    };
    let mut solver = SplitStepSolver::new(s.grid.clone(), *params, schedule)?;
    let t_end = s.t_ramp + s.t_hold;
    let (field, trace) = solver
        .evolve(init, t_end, s.dt, Some(s.sample_interval), target, None)
        .into_result()?;
    let final_fidelity = fidelity(&field, &target.sample(&s.grid, field.t))?;
    let (mean_density, spread) = density_uniformity(&field);
    Ok(RampOutcome {
        trace,
        field,
        final_fidelity,
        mean_density,
        spread,
    })
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub g1d: f64,
    pub k: f64,
    pub alpha: Branch,
    pub v0_values: Vec<f64>,
    pub ef_values: Vec<f64>,
    pub n_points: usize,
    pub x_max: f64,
    pub steps_per_period: u32,
    pub probe_periods: f64,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub i: usize,
    pub j: usize,
    pub v0: f64,
    pub ef: f64,
    pub v1: f64,
    pub region: RegionClass,
    pub probe_time: f64,
    pub fidelity: Option<f64>,
    pub status: String,
}

pub const SWEEP_COLUMNS: &str = "i,j,V0,EF,V1,region,probe_time,fidelity,status";

fn sweep_cell(s: &SweepSettings, i: usize, j: usize) -> SweepCell {
    let (v0, ef) = (s.v0_values[i], s.ef_values[j]);
    let mut cell = SweepCell {
        i,
        j,
        v0,
        ef,
        v1: f64::NAN,
        region: RegionClass::Infeasible,
        probe_time: f64::NAN,
        fidelity: None,
        status: "skipped".into(),
    };
    let params = match make_balanced_params(s.g1d, v0, ef, s.k, s.alpha) {
        Ok(p) => p,
        Err(_) => return cell,
    };
    cell.v1 = params.v1();
    cell.region = classify_region(&params);
    if cell.region == RegionClass::Infeasible {
        return cell;
    }
    cell.probe_time = s.probe_periods * params.period();
    let run = (|| -> Result<f64> {
        let grid = Grid::for_lattice(s.n_points, s.x_max, s.k)?;
        let settings = EnsembleSettings {
            grid,
            dt: params.period() / s.steps_per_period as f64,
            t_end: cell.probe_time,
            sample_interval: cell.probe_time,
            epsilon: s.epsilon,
            seeds: Vec::new(),
        };
        let seed = s.seed + (i * s.ef_values.len() + j) as u64;
        let run = perturbed_run(&params, &settings, seed)?;
        if let Some(e) = run.failure {
            return Err(e);
        }
        Ok(*run.trace.fidelity.last().expect("trace has the final sample"))
    })();
    match run {
        Ok(f) => {
            cell.fidelity = Some(f);
            cell.status = "ok".into();
        }
        Err(e) => cell.status = format!("failed:{}", e.category()),
    }
    cell
}

/// Classifies every (V0, EF) cell and, for feasible ones, measures the
/// fidelity after a short noisy evolution. Cells run concurrently and are
/// returned in row-major (V0, EF) order.
pub fn region_sweep(s: &SweepSettings) -> Vec<SweepCell> {
    let n_ef = s.ef_values.len();
    (0..s.v0_values.len() * n_ef)
        .into_par_iter()
        .map(|c| sweep_cell(s, c / n_ef, c % n_ef))
        .collect()
}

pub fn write_sweep_csv<W: Write>(mut w: W, cells: &[SweepCell], header: &[String]) -> std::io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for c in cells {
        let f = c.fidelity.map(|f| f.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            c.i, c.j, c.v0, c.ef, c.v1, c.region, c.probe_time, f, c.status
        )?;
    }
    Ok(())
}

/// Files written by one run and a JSON summary of its headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub manifest_version: u32,
    pub code_version: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub wall_time_s: f64,
    pub outputs: &'a [String],
    pub summary: &'a Value,
    pub config: Value,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn snapshot(&mut self, stem: &str, field: &WaveField, format: SnapshotFormat, header: &[String]) -> Result<()> {
        match format {
            SnapshotFormat::Csv => self.write(&format!("{stem}.csv"), |w| io::write_snapshot_csv(w, field, header)),
            SnapshotFormat::Binary => self.write(&format!("{stem}.bin"), |w| io::write_snapshot_binary(w, field)),
            SnapshotFormat::None => Ok(()),
        }
    }
}

fn header_for(spec: &ExperimentSpec, params: Option<&FloquetParams>) -> Vec<String> {
    let mut h = vec![format!("{CODE_VERSION}, experiment = {}", spec.experiment.as_str())];
    if let Some(p) = params {
        h.extend(io::params_header(p));
    }
    h
}

/// Runs the experiment selected by `spec.experiment` and writes its outputs
/// and manifest into [`ExperimentSpec::output_dir`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunOutput> {
    let started = Instant::now();
    let mut out = Outputs::new(spec.output_dir())?;
    let summary = match spec.experiment {
        ExperimentKind::ExactFields => run_exact_fields(spec, &mut out)?,
        ExperimentKind::PerturbedEvolution => run_perturbed_evolution(spec, &mut out)?,
        ExperimentKind::RampDown => run_ramp(spec, Direction::Down, &mut out)?,
        ExperimentKind::RampUp => run_ramp(spec, Direction::Up, &mut out)?,
        ExperimentKind::RegionSweep => run_region_sweep(spec, &mut out)?,
        ExperimentKind::LinStab => run_linstab(spec, &mut out)?,
    };
    let manifest = Manifest {
        manifest_version: 1,
        code_version: CODE_VERSION,
        experiment: spec.experiment.as_str(),
        seed: spec.noise.seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: &out.files,
        summary: &summary,
        config: spec.to_json(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(out.dir.join("manifest.json"), text + "\n")?;
    Ok(RunOutput {
        dir: out.dir,
        files: out.files,
        summary,
    })
}

fn run_exact_fields(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Value> {
    let params = spec.floquet_params()?;
    let exact = ExactState::new(params)?;
    let e = &spec.exact;
    let header = header_for(spec, Some(&params));
    let rows = exact_field_map(&exact, spec.solver.x_max, e.n_x, e.periods, e.samples_per_period, e.phase_convention);
    out.write("exact_fields.csv", |w| io::write_field_map(w, &rows, e.phase_convention, &header))?;
    let t_max = e.periods * params.period();
    let nodes: Vec<VortexNode> = exact
        .vortex_nodes(e.node_orders, (-spec.solver.x_max, spec.solver.x_max))
        .into_iter()
        .filter(|n| n.t <= t_max * (1.0 + 1e-12))
        .collect();
    out.write("exact_nodes.csv", |w| io::write_nodes(w, &nodes, &header))?;
    let min_density = rows.iter().map(|r| r.density).fold(f64::INFINITY, f64::min);
    let max_density = rows.iter().map(|r| r.density).fold(0.0, f64::max);
    Ok(json!({
        "region": classify_region(&params).as_str(),
        "rows": rows.len(),
        "nodes": nodes.len(),
        "min_density": min_density,
        "max_density": max_density,
    }))
}

fn run_perturbed_evolution(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Value> {
    let params = spec.floquet_params()?;
    let period = params.period();
    let settings = EnsembleSettings {
        grid: spec.grid()?,
        dt: spec.solver.dt(&params)?,
        t_end: spec.run.t_end.unwrap_or(spec.run.periods * period),
        sample_interval: period / spec.run.samples_per_period.max(1) as f64,
        epsilon: spec.noise.epsilon,
        seeds: (0..spec.noise.realizations.max(1) as u64).map(|i| spec.noise.seed + i).collect(),
    };
    let runs = perturbed_ensemble(&params, &settings)?;
    let base = header_for(spec, Some(&params));
    let mut per_seed = Vec::new();
    for run in &runs {
        let mut header = base.clone();
        header.push(format!("seed = {}, epsilon = {}, dt = {}", run.seed, settings.epsilon, settings.dt));
        if let Some(e) = &run.failure {
            header.push(format!("failure = {}: {e}", e.category()));
        }
        out.write(&format!("trace_seed{}.csv", run.seed), |w| run.trace.write_csv(w, &header))?;
        out.snapshot(&format!("final_seed{}", run.seed), &run.field, spec.run.snapshot_format, &header)?;
        per_seed.push(json!({
            "seed": run.seed,
            "final_fidelity": run.trace.fidelity.last(),
            "min_fidelity": run.trace.fidelity.iter().cloned().fold(f64::INFINITY, f64::min),
            "norm_drift": run.trace.max_norm_drift(),
            "failure": run.failure.as_ref().map(|e| e.category()),
        }));
    }
    let traces: Vec<DiagnosticsTrace> = runs.iter().map(|r| r.trace.clone()).collect();
    let mean = DiagnosticsTrace::mean(&traces)?;
    if runs.len() > 1 {
        let mut header = base.clone();
        header.push(format!("mean over {} seeds", runs.len()));
        out.write("trace_mean.csv", |w| mean.write_csv(w, &header))?;
    }
    Ok(json!({
        "region": classify_region(&params).as_str(),
        "mean_final_fidelity": mean.fidelity.last(),
        "mean_min_fidelity": mean.fidelity.iter().cloned().fold(f64::INFINITY, f64::min),
        "runs": per_seed,
    }))
}

fn run_ramp(spec: &ExperimentSpec, direction: Direction, out: &mut Outputs) -> Result<Value> {
    let params = spec.floquet_params()?;
    let half = std::f64::consts::PI / params.omega();
    let settings = RampSettings {
        direction,
        t_ramp: spec.ramp.ramp_time * half,
        t_hold: spec.ramp.hold_time * half,
        theta0: spec.ramp.theta0,
        grid: spec.grid()?,
        dt: spec.solver.dt(&params)?,
        sample_interval: params.period() / spec.ramp.samples_per_period.max(1) as f64,
    };
    let outcome = ramp_protocol(&params, &settings)?;
    let name = match direction {
        Direction::Down => "ramp_down",
        Direction::Up => "ramp_up",
    };
    let mut header = header_for(spec, Some(&params));
    header.push(format!(
        "t_ramp = {}, t_hold = {}, theta0 = {}, dt = {}",
        settings.t_ramp, settings.t_hold, settings.theta0, settings.dt
    ));
    out.write(&format!("{name}_trace.csv"), |w| outcome.trace.write_csv(w, &header))?;
    out.snapshot(&format!("{name}_final"), &outcome.field, spec.run.snapshot_format, &header)?;
    let unit = spec.params.energy_unit() / spec.params.g1d;
    Ok(json!({
        "direction": direction,
        "final_fidelity": outcome.final_fidelity,
        "mean_density": outcome.mean_density,
        "mean_density_per_unit": outcome.mean_density / unit,
        "relative_spread": outcome.spread,
        "norm_drift": outcome.trace.max_norm_drift(),
    }))
}

fn run_region_sweep(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Value> {
    let p = &spec.params;
    let sw = &spec.sweep;
    let unit = p.energy_unit();
    let settings = SweepSettings {
        g1d: p.g1d,
        k: p.k,
        alpha: p.alpha,
        v0_values: linspace(sw.v0_min, sw.v0_max, sw.v0_steps).into_iter().map(|v| v * unit).collect(),
        ef_values: linspace(sw.ef_min, sw.ef_max, sw.ef_steps).into_iter().map(|v| v * unit).collect(),
        n_points: spec.solver.n_points,
        x_max: spec.solver.x_max,
        steps_per_period: spec.solver.steps_per_period,
        probe_periods: sw.probe_periods,
        epsilon: spec.noise.epsilon,
        seed: spec.noise.seed,
    };
    if settings.steps_per_period == 0 {
        return Err(Error::Config("solver.steps_per_period must be positive".into()));
    }
    // Validate the shared grid once so that a bad grid is a run error
    // rather than a failure in every cell.
    Grid::for_lattice(settings.n_points, settings.x_max, settings.k)?;
    let cells = region_sweep(&settings);
    let mut header = header_for(spec, None);
    header.push(format!(
        "g1d = {}, k = {}, alpha = {}, epsilon = {}, probe_periods = {}",
        p.g1d,
        p.k,
        i64::from(p.alpha),
        settings.epsilon,
        settings.probe_periods
    ));
    out.write("sweep.csv", |w| write_sweep_csv(w, &cells, &header))?;
    let mut counts = serde_json::Map::new();
    for region in RegionClass::ALL {
        let n = cells.iter().filter(|c| c.region == region).count();
        counts.insert(region.as_str().to_string(), json!(n));
    }
    Ok(json!({ "cells": cells.len(), "regions": counts }))
}

fn run_linstab(spec: &ExperimentSpec, out: &mut Outputs) -> Result<Value> {
    let params = spec.floquet_params()?;
    let exact = ExactState::new(params)?;
    let grid = spec.grid()?;
    let ls = &spec.linstab;
    let config: StabilityConfig = ls.stability_config();
    let ops = StabilityOperators::new(exact, grid.clone(), config)?;
    let period = params.period();
    let dt = spec.solver.dt(&params)? / 4.0;
    let realizations = match ls.init {
        InitFamily::RandomSmooth => ls.seeds.max(1),
        _ => 1,
    };
    let inits = (0..realizations)
        .map(|i| match ls.init_for(i, spec.noise.seed, params.k()) {
            Some(init) => Ok(init),
            None => node_bump(&exact, &grid, ls.width).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "node-bump perturbations need a state with density nodes; region is {}",
                    exact.region()
                ))
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<BlowupReport> = inits
        .par_iter()
        .map(|init| {
            let p = init.build(&grid, 0.0)?;
            ops.evolve_perturbation(p, ls.periods * period, dt, Some(period / ls.samples_per_period.max(1) as f64))
                .map(|(_, r)| r)
        })
        .collect::<Result<_>>()?;
    let base = header_for(spec, Some(&params));
    let mut runs = Vec::new();
    for (i, (init, report)) in inits.iter().zip(&reports).enumerate() {
        let mut header = base.clone();
        header.push(format!("init = {}", serde_json::to_string(init).expect("init serialises")));
        header.push(format!("dt = {dt}, blowup_threshold = {}", config.blowup_threshold));
        out.write(&format!("perturbation_{i}.csv"), |w| report.write_csv(w, &header))?;
        runs.push(json!({
            "init": init,
            "blown_up": report.blown_up,
            "blowup_time": report.blowup_time,
            "max_amplification": report.max_amplification,
            "masked_points": report.masked_points,
        }));
    }
    let consistency = if exact.region() == RegionClass::PhaseContinuing && ls.consistency_eps > 0.0 {
        let init = inits[0].build(&grid, 0.0)?;
        Some(linearization_consistency(
            ls.consistency_eps,
            &init,
            &exact,
            ls.consistency_periods * period,
            dt * 4.0,
        )?)
    } else {
        None
    };
    Ok(json!({
        "region": exact.region().as_str(),
        "any_blown_up": reports.iter().any(|r| r.blown_up),
        "linearization_deviation": consistency,
        "runs": runs,
    }))
}

/// Reads a manifest written by [`run_experiment`].
pub fn read_manifest(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 5.0, 1), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn uniform_limit_map_is_flat() {
        let k = PI / 2.0;
        let p = make_balanced_params(1.0, 0.0, 2.0, k, Branch::Plus).unwrap();
        let ex = ExactState::new(p).unwrap();
        let rows = exact_field_map(&ex, 4.0, 9, 1.0, 10, PhaseConvention::FloquetFactorRemoved);
        assert_eq!(rows.len(), 9 * 11);
        assert!(rows.iter().all(|r| (r.density - 2.0).abs() < 1e-14));
    }

    #[test]
    fn sweep_marks_infeasible_cells_without_running_them() {
        let k = PI / 2.0;
        let s = SweepSettings {
            g1d: 1.0,
            k,
            alpha: Branch::Plus,
            v0_values: vec![-k],
            ef_values: vec![-k],
            n_points: 32,
            x_max: 4.0,
            steps_per_period: 100,
            probe_periods: 0.1,
            epsilon: 0.0,
            seed: 0,
        };
        let cells = region_sweep(&s);
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].region, RegionClass::Infeasible);
        assert_eq!(cells[0].status, "skipped");
    }
}
