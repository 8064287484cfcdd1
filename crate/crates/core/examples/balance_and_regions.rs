// Builds the stable and the vortex reference parameter sets, prints the
// derived quantities and classifies a few points of the balance region.

use std::f64::consts::PI;

use bec_floquet::{classify_region, make_balanced_params, Branch, FloquetParams};

fn describe(name: &str, p: &FloquetParams) {
    let k = p.k();
    println!(
        "{name:>6}: V0/k = {:+.4}  EF/k = {:.4}  V1/k = {:+.4}  Vc/k = {:.4}  N = {:.4}  T = {:.4}  -> {}",
        p.v0() / k,
        p.ef() / k,
        p.v1() / k,
        p.critical_depth() / k,
        p.atoms_per_well(),
        p.period(),
        classify_region(p)
    );
}

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let left = make_balanced_params(1.0, -0.3 * k, 3.0 * k, k, Branch::Plus)?;
    let right = make_balanced_params(1.0, -2.0 * k, 0.5 * k, k, Branch::Plus)?;
    describe("left", &left);
    describe("right", &right);

    // |V1| = 2|V0| exactly when EF = |V0|.
    let edge = make_balanced_params(1.0, -k, k, k, Branch::Minus)?;
    describe("edge", &edge);

    // Repulsive interactions need EF > 0 > V0; this one is rejected.
    match make_balanced_params(1.0, 0.5 * k, 1.0 * k, k, Branch::Plus) {
        Ok(p) => describe("odd", &p),
        Err(e) => println!("   bad: {e}"),
    }
    Ok(())
}
