// Evolves the phase-continuing state for one drive period on a ladder of
// step sizes and fits the order of the global error.

use std::f64::consts::PI;

use bec_floquet::{make_balanced_params, Branch, ExactState, Grid, RampSchedule, ReferenceState, SplitStepSolver};

pub fn main() -> anyhow::Result<()> {
    let k = PI / 2.0;
    let params = make_balanced_params(1.0, -0.3 * k, 3.0 * k, k, Branch::Plus)?;
    let exact = ExactState::new(params)?;
    let grid = Grid::for_lattice(128, 4.0, k)?;
    let period = params.period();
    let target = exact.sample(&grid, period);

    let mut points = Vec::new();
    for steps in [1000, 2000, 4000, 8000] {
        let dt = period / steps as f64;
        let mut solver = SplitStepSolver::new(grid.clone(), params, RampSchedule::constant(params.v0()))?;
        let end = solver.advance(exact.sample(&grid, 0.0), period, dt)?;
        let err = end
            .values
            .iter()
            .zip(&target.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = target.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        println!("steps/period {steps:>5}  dt = {dt:.3e}  relative error {:.3e}", err / scale);
        points.push((dt.ln(), (err / scale).ln()));
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let slope = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    println!("fitted order: {slope:.3}");
    Ok(())
}
