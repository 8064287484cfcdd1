//! Physical parameters of the driven lattice condensate and the balance-region
//! classification.
//!
//! Units: ħ = m = 1. The driving frequency is always derived from the lattice
//! wave vector as ω = k²/2 and is never an independent input.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing |V1| against 2|V0|.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Relative tolerance used when re-checking derived quantities of
/// externally supplied parameter sets.
const CHECK_RTOL: f64 = 1e-9;

/// Sign α selecting one of the two balanced branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

impl TryFrom<i64> for Branch {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Branch::Plus),
            -1 => Ok(Branch::Minus),
            other => Err(format!("branch sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<Branch> for i64 {
    fn from(b: Branch) -> i64 {
        match b {
            Branch::Plus => 1,
            Branch::Minus => -1,
        }
    }
}

/// Full parameter set of the driven system.
///
/// Values built through [`make_balanced_params`] always satisfy the balance
/// invariants. [`FloquetParams::from_components`] accepts arbitrary values so
/// that [`classify_region`] can be total; use [`FloquetParams::validate`] to
/// check such sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloquetParams {
    g1d: f64,
    v0: f64,
    v1: f64,
    ef: f64,
    k: f64,
    omega: f64,
    alpha: Branch,
    atoms_per_well: f64,
    critical_depth: f64,
}

impl FloquetParams {
    /// Assembles a parameter set without checking the balance invariants.
    /// ω, N and Vc are derived from the inputs.
    pub fn from_components(g1d: f64, v0: f64, v1: f64, ef: f64, k: f64, alpha: Branch) -> Self {
        let omega = 0.5 * k * k;
        let atoms_per_well = PI * (ef - 0.5 * v0) / (k * g1d);
        let critical_depth = 2.0 * k * atoms_per_well * g1d.abs() / PI;
        FloquetParams {
            g1d,
            v0,
            v1,
            ef,
            k,
            omega,
            alpha,
            atoms_per_well,
            critical_depth,
        }
    }

    pub fn g1d(&self) -> f64 {
        self.g1d
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn v1(&self) -> f64 {
        self.v1
    }
    pub fn ef(&self) -> f64 {
        self.ef
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn alpha(&self) -> Branch {
        self.alpha
    }
    /// Average number of atoms per lattice well, N = π(EF − V0/2)/(k g1d).
    pub fn atoms_per_well(&self) -> f64 {
        self.atoms_per_well
    }
    /// Critical lattice depth Vc = 2kN|g1d|/π.
    pub fn critical_depth(&self) -> f64 {
        self.critical_depth
    }
    /// Chemical potential of the uniform state carrying the same atom number.
    pub fn uniform_chemical_potential(&self) -> f64 {
        self.ef - 0.5 * self.v0
    }
    /// Drive period 2π/ω.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
    /// Lattice period 2π/k of the standing wave cos(kx).
    pub fn lattice_period(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// Same parameters with every energy scale (V0, V1, EF, g1d) multiplied by
    /// `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        FloquetParams::from_components(
            self.g1d * factor,
            self.v0 * factor,
            self.v1 * factor,
            self.ef * factor,
            self.k,
            self.alpha,
        )
    }

    /// Checks every feasibility invariant and reports the first failure.
    pub fn validate(&self) -> Result<()> {
        let all = [self.g1d, self.v0, self.v1, self.ef, self.k];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InfeasibleParameters("non-finite parameter".into()));
        }
        if self.g1d == 0.0 {
            return Err(Error::InfeasibleParameters("g1d must be nonzero".into()));
        }
        if self.k <= 0.0 {
            return Err(Error::InfeasibleParameters("k must be positive".into()));
        }
        check_sign_conditions(self.g1d, self.v0, self.ef)?;
        let expected_v1 = balanced_drive(self.v0, self.ef, self.alpha);
        let scale = self.v1.abs().max(expected_v1.abs()).max(f64::MIN_POSITIVE);
        if (self.v1 - expected_v1).abs() > CHECK_RTOL * scale {
            return Err(Error::InfeasibleParameters(format!(
                "driving strength V1 = {} violates the balance V1 = 2α√(−EF·V0) = {}",
                self.v1, expected_v1
            )));
        }
        if self.atoms_per_well < 0.0 {
            return Err(Error::InfeasibleParameters(format!(
                "atoms per well N = {} is negative",
                self.atoms_per_well
            )));
        }
        let vc = self.critical_depth;
        let slack = CHECK_RTOL * vc.max(f64::MIN_POSITIVE);
        if self.v0.abs() > vc + slack {
            return Err(Error::InfeasibleParameters(format!(
                "|V0| = {} exceeds the critical depth Vc = {vc}",
                self.v0.abs()
            )));
        }
        if self.v1.abs() > vc / 2f64.sqrt() + slack {
            return Err(Error::InfeasibleParameters(format!(
                "|V1| = {} exceeds Vc/√2 = {}",
                self.v1.abs(),
                vc / 2f64.sqrt()
            )));
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.validate().is_ok()
    }
}

fn balanced_drive(v0: f64, ef: f64, alpha: Branch) -> f64 {
    // −EF·V0 may come out as −0.0 or a tiny negative from rounding.
    2.0 * alpha.sign() * (-ef * v0).max(0.0).sqrt()
}

fn check_sign_conditions(g1d: f64, v0: f64, ef: f64) -> Result<()> {
    if ef / g1d < 0.0 {
        return Err(Error::InfeasibleParameters(format!(
            "√(EF/g1d) is imaginary: EF/g1d = {} < 0",
            ef / g1d
        )));
    }
    if v0 / g1d > 0.0 {
        return Err(Error::InfeasibleParameters(format!(
            "√(−V0/g1d) is imaginary: V0/g1d = {} > 0",
            v0 / g1d
        )));
    }
    if ef * v0 > 0.0 {
        return Err(Error::InfeasibleParameters(format!(
            "√(−EF·V0) is imaginary: EF·V0 = {} > 0",
            ef * v0
        )));
    }
    Ok(())
}

/// Builds a balanced parameter set: V1 = 2α√(−EF·V0) and ω = k²/2.
pub fn make_balanced_params(g1d: f64, v0: f64, ef: f64, k: f64, alpha: Branch) -> Result<FloquetParams> {
    if !(g1d.is_finite() && v0.is_finite() && ef.is_finite() && k.is_finite()) {
        return Err(Error::InfeasibleParameters("non-finite parameter".into()));
    }
    if g1d == 0.0 {
        return Err(Error::InfeasibleParameters("g1d must be nonzero".into()));
    }
    if k <= 0.0 {
        return Err(Error::InfeasibleParameters("k must be positive".into()));
    }
    check_sign_conditions(g1d, v0, ef)?;
    let v1 = balanced_drive(v0, ef, alpha);
    let params = FloquetParams::from_components(g1d, v0, v1, ef, k, alpha);
    params.validate()?;
    Ok(params)
}

/// Critical lattice depth Vc = 2kN|g1d|/π.
pub fn critical_depth(params: &FloquetParams) -> f64 {
    params.critical_depth()
}

/// Location of a parameter set in the balance region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionClass {
    PhaseContinuing,
    Boundary,
    PhaseJumping,
    Infeasible,
}

impl RegionClass {
    pub const ALL: [RegionClass; 4] = [
        RegionClass::PhaseContinuing,
        RegionClass::Boundary,
        RegionClass::PhaseJumping,
        RegionClass::Infeasible,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionClass::PhaseContinuing => "phase-continuing",
            RegionClass::Boundary => "boundary",
            RegionClass::PhaseJumping => "phase-jumping",
            RegionClass::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a parameter set. Total on all inputs; the boundary test takes
/// precedence over the strict inequalities of the phase-jumping region.
pub fn classify_region(params: &FloquetParams) -> RegionClass {
    if params.validate().is_err() {
        return RegionClass::Infeasible;
    }
    let v0 = params.v0().abs();
    let v1 = params.v1().abs();
    // no lattice: uniform state, nothing to jump
    if v0 == 0.0 {
        return RegionClass::PhaseContinuing;
    }
    let diff = v1 - 2.0 * v0;
    if diff.abs() <= BOUNDARY_RTOL * v1.max(2.0 * v0) {
        return RegionClass::Boundary;
    }
    let vc = params.critical_depth();
    if diff < 0.0 && vc / 3.0 < v0 && v0 < vc {
        RegionClass::PhaseJumping
    } else {
        RegionClass::PhaseContinuing
    }
}
