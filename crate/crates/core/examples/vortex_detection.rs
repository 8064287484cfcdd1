// Finds phase singularities numerically by plaquette winding on sampled
// snapshots and matches them to the closed-form node list.

use std::f64::consts::PI;

use bec_floquet::diagnostics::detect_vortices_numerical;
use bec_floquet::{make_balanced_params, Branch, ExactState, Grid, ReferenceState};

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let params = make_balanced_params(1.0, -2.0 * k, 0.5 * k, k, Branch::Plus)?;
    let exact = ExactState::new(params)?;
    let grid = Grid::for_lattice(128, 4.0, k)?;
    let period = params.period();

    // 64 snapshots per period, offset by half a cell so the node times fall
    // strictly inside plaquettes.
    let dt = period / 64.0;
    let snapshots: Vec<_> = (0..=80)
        .map(|j| exact.sample(&grid, -0.5 * dt + j as f64 * dt))
        .collect();
    let found = detect_vortices_numerical(&snapshots)?;
    let analytic = exact.vortex_nodes(2, (-4.0, 4.0));
    println!("{} numerical, {} analytic nodes", found.len(), analytic.len());
    for a in &analytic {
        let hit = found
            .iter()
            .find(|f| (f.x - a.x).abs() <= grid.dx() && (f.t - a.t).abs() <= dt);
        match hit {
            Some(f) => println!(
                "  analytic ({:+.3}, {:.3}) charge {:+} <- numerical ({:+.3}, {:.3}) charge {:+}",
                a.x, a.t, a.charge, f.x, f.t, f.charge
            ),
            None => println!("  analytic ({:+.3}, {:.3}) not found", a.x, a.t),
        }
    }
    Ok(())
}
