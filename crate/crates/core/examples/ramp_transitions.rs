// Slowly switches the driven lattice off (Floquet -> uniform) and on
// (uniform -> Floquet), and compares with a sudden quench.

use std::f64::consts::PI;

use bec_floquet::experiments::{ramp_protocol, Direction, RampSettings};
use bec_floquet::{make_balanced_params, Branch, Grid};

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let params = make_balanced_params(1.0, -0.3 * k, 3.0 * k, k, Branch::Plus)?;
    let half = PI / params.omega();
    let base = RampSettings {
        direction: Direction::Down,
        t_ramp: 15.0 * half,
        t_hold: 5.0 * half,
        theta0: 0.0,
        grid: Grid::for_lattice(128, 4.0, k)?,
        dt: params.period() / 4000.0,
        sample_interval: params.period() / 10.0,
    };

    let down = ramp_protocol(&params, &base)?;
    println!(
        "down:   F = {:.5}  <R^2>/k = {:.4}  spread = {:.2}%",
        down.final_fidelity,
        down.mean_density / k,
        100.0 * down.spread
    );
    let up = ramp_protocol(&params, &RampSettings { direction: Direction::Up, ..base.clone() })?;
    println!("up:     F = {:.5}", up.final_fidelity);
    let quench = ramp_protocol(
        &params,
        &RampSettings {
            direction: Direction::Up,
            t_ramp: 0.0,
            ..base
        },
    )?;
    println!("quench: F = {:.5}", quench.final_fidelity);
    Ok(())
}
