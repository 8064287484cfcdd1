//! Exact Floquet states of a periodically driven one-dimensional condensate.
//!
//! Units are ħ = m = 1. The crate provides the closed-form balanced states
//! ([`exact`]), a split-step integrator of the driven GP equation
//! ([`solver`]), the linearised perturbation dynamics ([`linear`]) and the
//! fidelity and density diagnostics used to compare them ([`diagnostics`]).
//! [`experiments`] wires these into the reproducible protocols that the
//! `floquet` binary and the examples run.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod io;
pub mod linear;
pub mod params;
pub mod solver;

pub mod cli;

pub use diagnostics::{fidelity, DiagnosticsTrace, TraceSample};
pub use error::{Error, Result};
pub use exact::{ExactState, PhaseConvention, VortexNode, WindingLoop};
pub use field::{ReferenceState, UniformState, WaveField};
pub use grid::{Grid, Spectral};
pub use linear::{PerturbationField, PerturbationInit, StabilityConfig, StabilityOperators};
pub use params::{classify_region, make_balanced_params, Branch, FloquetParams, RegionClass};
pub use solver::{RampSchedule, SplitStepSolver};
