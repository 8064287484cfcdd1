// Checks the operator identities of the linearised system, follows smooth
// random perturbations of the stable state and a node-localised bump on the
// vortex state, and compares the linear flow with finite-epsilon GP runs.

use std::f64::consts::PI;

use bec_floquet::linear::{linearization_consistency, node_bump};
use bec_floquet::{
    make_balanced_params, Branch, ExactState, Grid, PerturbationInit, StabilityConfig, StabilityOperators,
};

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let grid = Grid::for_lattice(128, 4.0, k)?;

    let left = ExactState::new(make_balanced_params(1.0, -0.3 * k, 3.0 * k, k, Branch::Plus)?)?;
    let ops = StabilityOperators::new(left, grid.clone(), StabilityConfig::default())?;
    let period = left.params().period();
    for frac in [0.1, 0.3, 0.7] {
        let (l1, s) = ops.background_residuals(frac * period)?;
        println!("t = {frac:.1}T: |L1 R| = {l1:.1e}  |R_t + S R| = {s:.1e}");
    }
    let dt = period / 16000.0;
    for seed in 0..3 {
        let p = PerturbationInit::RandomSmooth { seed, cutoff: 4.0 * k }.build(&grid, 0.0)?;
        let (_, report) = ops.evolve_perturbation(p, 2.0 * period, dt, Some(period))?;
        println!(
            "left, seed {seed}: max amplification {:.2} over 2 periods, blown up: {}",
            report.max_amplification, report.blown_up
        );
    }

    let right = ExactState::new(make_balanced_params(1.0, -2.0 * k, 0.5 * k, k, Branch::Plus)?)?;
    let ops = StabilityOperators::new(right, grid.clone(), StabilityConfig::default())?;
    let bump = node_bump(&right, &grid, 0.2).expect("the vortex state has nodes");
    let (_, report) = ops.evolve_perturbation(bump.build(&grid, 0.0)?, period, dt, Some(period / 50.0))?;
    println!("right, node bump: blown up = {} at t = {:?}", report.blown_up, report.blowup_time);

    let init = PerturbationInit::RandomSmooth { seed: 7, cutoff: 4.0 * k }.build(&grid, 0.0)?;
    for eps in [4e-3, 2e-3, 1e-3] {
        let dev = linearization_consistency(eps, &init, &left, 0.5 * period, period / 4000.0)?;
        println!("eps = {eps:.0e}: linear vs finite-difference deviation {dev:.3e}");
    }
    Ok(())
}
