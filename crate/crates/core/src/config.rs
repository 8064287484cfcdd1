//! Experiment configuration.
//!
//! A run is described by one TOML file with flat dotted keys such as
//! `params.V0_over_g = -0.3` or `solver.n_points = 128`. The file is layered
//! over [`DEFAULTS`], then `key=value` overrides are applied, and the merged
//! document is deserialised into an [`ExperimentSpec`]. Unknown keys are
//! errors. A JSON manifest written by a run is accepted in place of a TOML
//! file; its `config` object is used.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::exact::PhaseConvention;
use crate::grid::Grid;
use crate::linear::{PerturbationInit, StabilityConfig};
use crate::params::{make_balanced_params, Branch, FloquetParams};
use crate::solver::RampSchedule;

/// Environment variable naming the root directory for relative output paths.
pub const OUTPUT_ROOT_ENV: &str = "FLOQUET_OUT";

pub const CONFIG_VERSION: u32 = 1;

/// Every default value, in the same format as a config file.
pub const DEFAULTS: &str = r#"
config_version = 1
experiment = "exact-fields"

# Energies V0 and EF are entered as V0/g1d and EF/g1d. With units_of_k they
# are further measured in units of k.
params.g1d = 1.0
params.V0_over_g = -0.3
params.EF_over_g = 3.0
params.alpha = 1
params.k = 1.5707963267948966
params.units_of_k = true

solver.n_points = 128
solver.x_max = 4.0
solver.steps_per_period = 4000

run.periods = 8.0
run.samples_per_period = 50
run.snapshot_format = "binary"

noise.epsilon = 1e-3
noise.seed = 1
noise.realizations = 1

exact.periods = 2.0
exact.n_x = 201
exact.samples_per_period = 100
exact.phase_convention = "floquet-factor-removed"
exact.node_orders = 4

# Ramp and hold durations are in units of pi/omega.
ramp.direction = "down"
ramp.ramp_time = 15.0
ramp.hold_time = 5.0
ramp.theta0 = 0.0
ramp.samples_per_period = 50

sweep.V0_min = -3.0
sweep.V0_max = -0.25
sweep.V0_steps = 12
sweep.EF_min = -0.5
sweep.EF_max = 4.0
sweep.EF_steps = 10
sweep.probe_periods = 2.0

linstab.init = "node-bump"
linstab.seeds = 1
linstab.cutoff = 4.0
linstab.center = 0.0
linstab.width = 0.2
linstab.periods = 8.0
linstab.samples_per_period = 50
linstab.singular_rtol = 1e-6
linstab.masking = true
linstab.blowup_threshold = 1e6
linstab.consistency_eps = 1e-4
linstab.consistency_periods = 0.5

output.dir = "floquet-out"
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExactFields,
    PerturbedEvolution,
    RampDown,
    RampUp,
    RegionSweep,
    LinStab,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ExactFields => "exact-fields",
            ExperimentKind::PerturbedEvolution => "perturbed-evolution",
            ExperimentKind::RampDown => "ramp-down",
            ExperimentKind::RampUp => "ramp-up",
            ExperimentKind::RegionSweep => "region-sweep",
            ExperimentKind::LinStab => "lin-stab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub g1d: f64,
    #[serde(rename = "V0_over_g")]
    pub v0_over_g: f64,
    #[serde(rename = "EF_over_g")]
    pub ef_over_g: f64,
    pub alpha: Branch,
    pub k: f64,
    pub units_of_k: bool,
}

impl ParamsSection {
    /// Energy scale that multiplies the `*_over_g` entries.
    pub fn energy_unit(&self) -> f64 {
        if self.units_of_k {
            self.g1d * self.k
        } else {
            self.g1d
        }
    }

    pub fn build(&self) -> Result<FloquetParams> {
        let unit = self.energy_unit();
        make_balanced_params(self.g1d, self.v0_over_g * unit, self.ef_over_g * unit, self.k, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub n_points: usize,
    pub x_max: f64,
    pub steps_per_period: u32,
    /// Explicit step size; overrides `steps_per_period` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl SolverSection {
    pub fn grid(&self, k: f64) -> Result<Grid> {
        Grid::for_lattice(self.n_points, self.x_max, k)
    }

    pub fn dt(&self, params: &FloquetParams) -> Result<f64> {
        let dt = match self.dt {
            Some(dt) => dt,
            None => {
                if self.steps_per_period == 0 {
                    return Err(Error::Config("solver.steps_per_period must be positive".into()));
                }
                params.period() / self.steps_per_period as f64
            }
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("solver.dt must be positive, got {dt}")));
        }
        Ok(dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Csv,
    Binary,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub periods: f64,
    /// Absolute end time; overrides `periods` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub samples_per_period: u32,
    pub snapshot_format: SnapshotFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub epsilon: f64,
    pub seed: u64,
    pub realizations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSection {
    pub periods: f64,
    pub n_x: usize,
    pub samples_per_period: u32,
    pub phase_convention: PhaseConvention,
    pub node_orders: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampDirection {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSection {
    pub direction: RampDirection,
    pub ramp_time: f64,
    pub hold_time: f64,
    pub theta0: f64,
    pub samples_per_period: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "V0_min")]
    pub v0_min: f64,
    #[serde(rename = "V0_max")]
    pub v0_max: f64,
    #[serde(rename = "V0_steps")]
    pub v0_steps: usize,
    #[serde(rename = "EF_min")]
    pub ef_min: f64,
    #[serde(rename = "EF_max")]
    pub ef_max: f64,
    #[serde(rename = "EF_steps")]
    pub ef_steps: usize,
    pub probe_periods: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitFamily {
    NodeBump,
    RandomSmooth,
    GaussianBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinStabSection {
    pub init: InitFamily,
    pub seeds: u32,
    /// Low-pass cutoff of random perturbations, in units of k.
    pub cutoff: f64,
    pub center: f64,
    pub width: f64,
    pub periods: f64,
    pub samples_per_period: u32,
    pub singular_rtol: f64,
    pub masking: bool,
    pub blowup_threshold: f64,
    pub consistency_eps: f64,
    pub consistency_periods: f64,
}

impl LinStabSection {
    pub fn stability_config(&self) -> StabilityConfig {
        StabilityConfig {
            singular_rtol: self.singular_rtol,
            masking: self.masking,
            blowup_threshold: self.blowup_threshold,
        }
    }

    /// Initial perturbation for realisation `i`. Node bumps depend on the
    /// state and are resolved by the caller, so they give `None`.
    pub fn init_for(&self, i: u32, base_seed: u64, k: f64) -> Option<PerturbationInit> {
        match self.init {
            InitFamily::RandomSmooth => Some(PerturbationInit::RandomSmooth {
                seed: base_seed + i as u64,
                cutoff: self.cutoff * k,
            }),
            InitFamily::GaussianBump => Some(PerturbationInit::GaussianBump {
                center: self.center,
                width: self.width,
            }),
            InitFamily::NodeBump => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Fully resolved description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub config_version: u32,
    pub experiment: ExperimentKind,
    pub params: ParamsSection,
    pub solver: SolverSection,
    pub run: RunSection,
    pub noise: NoiseSection,
    pub exact: ExactSection,
    pub ramp: RampSection,
    pub sweep: SweepSection,
    pub linstab: LinStabSection,
    pub output: OutputSection,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec::from_value(defaults_value()).expect("built-in defaults are valid")
    }
}

impl ExperimentSpec {
    /// Loads a TOML config or JSON manifest and applies `overrides` of the
    /// form `key=value` (dotted keys, TOML value syntax; bare words are
    /// taken as strings).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = defaults_value();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            merge(&mut doc, parse_document(&text, path)?);
        }
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        ExperimentSpec::from_value(doc)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut doc = defaults_value();
        merge(&mut doc, toml_to_value(text)?);
        ExperimentSpec::from_value(doc)
    }

    fn from_value(doc: Value) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        if spec.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                spec.config_version
            )));
        }
        Ok(spec)
    }

    /// The spec as a TOML document that [`ExperimentSpec::from_toml_str`]
    /// reads back to an equal spec.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("spec serialises to JSON")
    }

    pub fn floquet_params(&self) -> Result<FloquetParams> {
        self.params.build()
    }

    pub fn grid(&self) -> Result<Grid> {
        self.solver.grid(self.params.k)
    }

    /// Ramp schedule for the configured direction; the drive amplitude runs
    /// between 0 and V0.
    pub fn ramp_schedule(&self, params: &FloquetParams) -> RampSchedule {
        let t_ramp = self.ramp.ramp_time * PI / params.omega();
        match self.ramp.direction {
            RampDirection::Down => RampSchedule::linear_down(params.v0(), t_ramp),
            RampDirection::Up => RampSchedule::linear_up(params.v0(), t_ramp),
        }
    }

    /// Output directory, resolved against `$FLOQUET_OUT` when relative.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output(&self.output.dir, std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
    }
}

pub fn resolve_output(dir: &Path, root: Option<PathBuf>) -> PathBuf {
    match root {
        Some(root) if dir.is_relative() => root.join(dir),
        _ => dir.to_path_buf(),
    }
}

fn defaults_value() -> Value {
    toml_to_value(DEFAULTS).expect("built-in defaults parse")
}

fn toml_to_value(text: &str) -> Result<Value> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))
}

fn parse_document(text: &str, path: &Path) -> Result<Value> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    if !is_json {
        return toml_to_value(text);
    }
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    match value {
        Value::Object(mut map) => match map.remove("config") {
            Some(cfg @ Value::Object(_)) => Ok(cfg),
            Some(_) => Err(Error::Config("manifest `config` entry is not an object".into())),
            None => Ok(Value::Object(map)),
        },
        _ => Err(Error::Config(format!("{} is not a JSON object", path.display()))),
    }
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_override(doc: &mut Value, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {ov:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {ov:?} has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("key present")).map_err(|e| Error::Config(e.to_string()))?,
        Err(_) => Value::String(raw.to_string()),
    };
    let mut slot = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = slot
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?} descends into a value")))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        slot = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}
