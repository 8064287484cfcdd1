// Adds white noise to both exact states and follows the seed-averaged
// fidelity: the phase-continuing state stays put, the vortex state decays.

use std::f64::consts::PI;

use bec_floquet::experiments::{perturbed_ensemble, EnsembleSettings};
use bec_floquet::{make_balanced_params, Branch, DiagnosticsTrace, Grid};

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let cases = [("left", -0.3, 3.0), ("right", -2.0, 0.5)];
    for (name, v0, ef) in cases {
        let params = make_balanced_params(1.0, v0 * k, ef * k, k, Branch::Plus)?;
        let period = params.period();
        let settings = EnsembleSettings {
            grid: Grid::for_lattice(128, 4.0, k)?,
            dt: period / 4000.0,
            t_end: 4.0 * period,
            sample_interval: period / 10.0,
            epsilon: 1e-3,
            seeds: (1..=4).collect(),
        };
        let runs = perturbed_ensemble(&params, &settings)?;
        let traces: Vec<DiagnosticsTrace> = runs.into_iter().map(|r| r.trace).collect();
        let mean = DiagnosticsTrace::mean(&traces)?;
        print!("{name:>6}:");
        for i in (0..mean.len()).step_by(5) {
            print!(" {:.3}", mean.fidelity[i]);
        }
        println!("   (norm drift {:.1e})", mean.max_norm_drift());
    }
    Ok(())
}
