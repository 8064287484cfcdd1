// Coarse map of the balance region: class and short-run fidelity per cell.

use std::f64::consts::PI;

use bec_floquet::experiments::{linspace, region_sweep, SweepSettings};
use bec_floquet::{Branch, RegionClass};

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let settings = SweepSettings {
        g1d: 1.0,
        k,
        alpha: Branch::Plus,
        v0_values: linspace(-2.5 * k, -0.5 * k, 5),
        ef_values: linspace(-0.5 * k, 3.0 * k, 8),
        n_points: 64,
        x_max: 4.0,
        steps_per_period: 2000,
        probe_periods: 2.0,
        epsilon: 1e-3,
        seed: 11,
    };
    let cells = region_sweep(&settings);
    print!("V0/k \\ EF/k");
    for ef in &settings.ef_values {
        print!("{:>8.2}", ef / k);
    }
    println!();
    for (i, v0) in settings.v0_values.iter().enumerate() {
        print!("{:>11.2}", v0 / k);
        for c in cells.iter().filter(|c| c.i == i) {
            let tag = match c.region {
                RegionClass::PhaseContinuing => "C",
                RegionClass::PhaseJumping => "J",
                RegionClass::Boundary => "B",
                RegionClass::Infeasible => "-",
            };
            match c.fidelity {
                Some(f) => print!("{:>8}", format!("{tag} {f:.2}")),
                None => print!("{tag:>8}"),
            }
        }
        println!();
    }
    println!("C phase-continuing, J phase-jumping, B boundary, - infeasible; number = fidelity after 2 periods");
    Ok(())
}
