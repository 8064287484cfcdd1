use std::f64::consts::PI;

use approx::assert_relative_eq;
use bec_floquet::diagnostics::{conserved_norm, density_uniformity, detect_vortices_numerical, fidelity};
use bec_floquet::exact::WindingLoop;
use bec_floquet::experiments::{perturbed_run, ramp_protocol, Direction, EnsembleSettings, RampSettings};
use bec_floquet::linear::linearization_consistency;
use bec_floquet::solver::add_white_noise;
use bec_floquet::{
    classify_region, make_balanced_params, Branch, ExactState, FloquetParams, Grid, PerturbationField,
    PerturbationInit, PhaseConvention, RampSchedule, ReferenceState, RegionClass, SplitStepSolver,
    StabilityConfig, StabilityOperators, UniformState, WaveField,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: f64 = PI / 2.0;

fn left() -> FloquetParams {
    make_balanced_params(1.0, -0.3 * K, 3.0 * K, K, Branch::Plus).unwrap()
}

fn right() -> FloquetParams {
    make_balanced_params(1.0, -2.0 * K, 0.5 * K, K, Branch::Plus).unwrap()
}

fn rel_l2(a: &WaveField, b: &WaveField) -> f64 {
    let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
    let s: f64 = b.values.iter().map(|z| z.norm_sqr()).sum();
    (d / s).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn balanced_params_are_never_infeasible(
        g in prop_oneof![0.1f64..5.0, -5.0f64..-0.1],
        v0_mag in 0.0f64..5.0,
        ef_mag in 0.0f64..5.0,
        plus in any::<bool>(),
    ) {
        // Feasible signs: EF/g ≥ 0 and V0/g ≤ 0.
        let (v0, ef) = (-g.signum() * v0_mag, g.signum() * ef_mag);
        let alpha = if plus { Branch::Plus } else { Branch::Minus };
        let p = make_balanced_params(g, v0, ef, K, alpha).unwrap();
        prop_assert_ne!(classify_region(&p), RegionClass::Infeasible);
        prop_assert!(p.v1().abs() <= p.critical_depth() / 2f64.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn common_scaling_keeps_the_region(
        v0_mag in 0.0f64..4.0,
        ef_mag in 0.0f64..4.0,
        factor in 0.01f64..100.0,
    ) {
        let p = make_balanced_params(1.0, -v0_mag, ef_mag, K, Branch::Plus).unwrap();
        prop_assert_eq!(classify_region(&p.scaled(factor)), classify_region(&p));
    }

    #[test]
    fn classification_is_total(
        g in -10.0f64..10.0,
        v0 in -10.0f64..10.0,
        v1 in -10.0f64..10.0,
        ef in -10.0f64..10.0,
        k in -2.0f64..2.0,
    ) {
        let p = FloquetParams::from_components(g, v0, v1, ef, k, Branch::Plus);
        let r = classify_region(&p);
        prop_assert_eq!(r == RegionClass::Infeasible, !p.is_feasible());
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in any::<u64>()) {
        let grid = Grid::new(32, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            let v = (0..32).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            WaveField::new(grid.clone(), 0.0, v).unwrap()
        };
        let a = draw();
        let b = draw();
        let ab = fidelity(&a, &b).unwrap();
        prop_assert_eq!(ab, fidelity(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}

#[test]
fn critical_depth_bound_is_saturated_at_half_depth() {
    // |V1| = Vc/√2 exactly when |V0| = Vc/2, i.e. |V0| = 2 EF.
    let p = make_balanced_params(1.0, -2.0 * K, 1.0 * K, K, Branch::Plus).unwrap();
    assert_relative_eq!(p.v0().abs(), p.critical_depth() / 2.0, max_relative = 1e-14);
    assert_relative_eq!(p.v1().abs(), p.critical_depth() / 2f64.sqrt(), max_relative = 1e-14);
}

#[test]
fn node_density_vanishes_and_winding_is_radius_independent() {
    let ex = ExactState::new(right()).unwrap();
    let lp = WindingLoop::default_for(ex.params());
    let nodes = ex.vortex_nodes(2, (-4.0, 4.0));
    assert_eq!(nodes.len(), 12);
    for node in &nodes {
        assert!(ex.density(node.x, node.t) < 1e-10);
        let w = ex.winding_number(node, lp).unwrap();
        assert_eq!(w, node.charge);
        assert_eq!(ex.winding_number(node, lp.scaled(0.5)).unwrap(), w);
        assert_eq!(ex.winding_number_with(node, lp, PhaseConvention::FloquetFactorRemoved).unwrap(), w);
    }
}

#[test]
fn charges_cancel_over_one_spatial_period() {
    // Brute-force loop integration around every node of one lattice period
    // [0, 2π/k) at fixed n.
    let ex = ExactState::new(right()).unwrap();
    let lp = WindingLoop::default_for(ex.params());
    for n in 0..3u32 {
        let nodes: Vec<_> = ex
            .vortex_nodes(n, (0.0, 2.0 * PI / K))
            .into_iter()
            .filter(|v| v.index.unwrap().n == n)
            .collect();
        assert_eq!(nodes.len(), 2);
        let total: f64 = nodes.iter().map(|v| ex.circulation(v.x, v.t, lp, PhaseConvention::Full)).sum();
        assert!(total.abs() < 1e-6, "n = {n}: {total}");
    }
}

#[test]
fn phase_continuing_density_is_strictly_positive() {
    let ex = ExactState::new(left()).unwrap();
    let period = ex.params().period();
    let mut min = f64::INFINITY;
    for i in 0..=400 {
        for j in 0..=100 {
            let x = -4.0 + 8.0 * i as f64 / 400.0;
            min = min.min(ex.density(x, period * j as f64 / 100.0));
        }
    }
    // EF + |V0| − |V1| at cos kx = 1, cos ωt = 1.
    let p = ex.params();
    let expected = (p.ef() - p.v0() - p.v1()) / p.g1d();
    assert_relative_eq!(min, expected, max_relative = 1e-12);
    assert!(min > 0.0);
}

#[test]
fn spatial_average_matches_uniform_chemical_potential() {
    for p in [left(), right()] {
        let ex = ExactState::new(p).unwrap();
        let grid = Grid::for_lattice(64, 4.0, K).unwrap();
        for t in [0.0, 0.77, 3.1] {
            let (mean, _) = density_uniformity(&ex.sample(&grid, t));
            assert_relative_eq!(mean, (p.ef() - 0.5 * p.v0()) / p.g1d(), max_relative = 1e-13);
        }
    }
}

#[test]
fn norm_counts_atoms_per_well() {
    // cos² has period π/k, so the domain of length 8 holds 8k/π wells.
    let p = left();
    let ex = ExactState::new(p).unwrap();
    let grid = Grid::for_lattice(128, 4.0, K).unwrap();
    let wells = grid.length() * K / PI;
    assert_relative_eq!(conserved_norm(&ex.sample(&grid, 1.3)), wells * p.atoms_per_well(), max_relative = 1e-13);
}

#[test]
fn spread_matches_density_extrema_at_time_zero() {
    // At t = 0 the density is the quadratic (EF − V0c² − V1c)/g in c = cos kx;
    // its extrema on [−1, 1] are at the endpoints or the vertex.
    let p = left();
    let ex = ExactState::new(p).unwrap();
    let grid = Grid::for_lattice(128, 4.0, K).unwrap();
    let f = |c: f64| (p.ef() - p.v0() * c * c - p.v1() * c) / p.g1d();
    let mut candidates = vec![f(-1.0), f(1.0)];
    let vertex = -p.v1() / (2.0 * p.v0());
    if vertex.abs() <= 1.0 {
        candidates.push(f(vertex));
    }
    let max = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = (p.ef() - 0.5 * p.v0()) / p.g1d();
    let (_, spread) = density_uniformity(&ex.sample(&grid, 0.0));
    assert_relative_eq!(spread, (max - min) / mean, max_relative = 1e-12);
}

#[test]
fn numerical_detection_finds_nothing_without_nodes() {
    let grid = Grid::for_lattice(64, 4.0, K).unwrap();
    let ex = ExactState::new(left()).unwrap();
    let period = ex.params().period();
    let snaps: Vec<_> = (0..=60).map(|j| ex.sample(&grid, period * j as f64 / 50.0)).collect();
    assert!(detect_vortices_numerical(&snaps).unwrap().is_empty());
    let uniform = UniformState { mu: 2.0, g1d: 1.0, theta0: 0.3 };
    let snaps: Vec<_> = (0..10).map(|j| uniform.sample(&grid, 0.1 * j as f64)).collect();
    assert!(detect_vortices_numerical(&snaps).unwrap().is_empty());
}

#[test]
fn fidelity_is_stable_under_grid_refinement() {
    let a = ExactState::new(left()).unwrap();
    let b = ExactState::new(make_balanced_params(1.0, -0.4 * K, 3.0 * K, K, Branch::Plus).unwrap()).unwrap();
    let f = |n: usize| {
        let grid = Grid::for_lattice(n, 4.0, K).unwrap();
        fidelity(&a.sample(&grid, 0.9), &b.sample(&grid, 0.9)).unwrap()
    };
    assert!((f(64) - f(128)).abs() < 1e-8);
    assert!(f(64) < 1.0 - 1e-4, "states must differ for the check to mean anything");
}

#[test]
fn noise_fidelity_loss_is_second_order() {
    // 1 − F ≈ |η⊥|²/|ψ|² with E|η|² = 2σ²n, σ = ε·max|ψ|; the component of
    // η parallel to ψ is a 1/n fraction and is neglected.
    let ex = ExactState::new(left()).unwrap();
    let grid = Grid::for_lattice(128, 4.0, K).unwrap();
    let psi = ex.sample(&grid, 0.0);
    let sum: f64 = psi.values.iter().map(|z| z.norm_sqr()).sum();
    for eps in [1e-3, 1e-4] {
        let sigma = eps * psi.max_abs();
        let expected = 2.0 * sigma * sigma * grid.n_points() as f64 / sum;
        let mut losses = Vec::new();
        for seed in 0..8 {
            let noisy = add_white_noise(&psi, eps, seed).unwrap();
            losses.push(1.0 - fidelity(&noisy, &psi).unwrap());
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        assert!((mean / expected - 1.0).abs() < 0.15, "eps {eps}: {mean} vs {expected}");
    }
}

#[test]
fn norm_is_conserved_over_ten_thousand_steps() {
    let p = right();
    let ex = ExactState::new(p).unwrap();
    let grid = Grid::for_lattice(128, 4.0, K).unwrap();
    let mut solver = SplitStepSolver::new(grid.clone(), p, RampSchedule::constant(p.v0())).unwrap();
    let mut f = add_white_noise(&ex.sample(&grid, 0.0), 1e-3, 4).unwrap();
    let n0 = conserved_norm(&f);
    let dt = p.period() / 4000.0;
    for _ in 0..10_000 {
        solver.step(&mut f, dt).unwrap();
    }
    assert!(((conserved_norm(&f) - n0) / n0).abs() < 1e-10);
}

#[test]
fn forward_then_backward_returns_the_initial_field() {
    let p = left();
    let ex = ExactState::new(p).unwrap();
    let grid = Grid::for_lattice(128, 4.0, K).unwrap();
    let mut solver = SplitStepSolver::new(grid.clone(), p, RampSchedule::constant(p.v0())).unwrap();
    let start = add_white_noise(&ex.sample(&grid, 0.0), 1e-3, 1).unwrap();
    let dt = p.period() / 4000.0;
    let mid = solver.advance(start.clone(), p.period(), dt).unwrap();
    let back = solver.advance(mid, 0.0, -dt).unwrap();
    assert!(rel_l2(&back, &start) < 1e-8);
}

#[test]
fn doubling_the_grid_changes_less_than_halving_the_step() {
    let p = left();
    let ex = ExactState::new(p).unwrap();
    let period = p.period();
    let run = |n: usize, steps: f64| {
        let grid = Grid::for_lattice(n, 4.0, K).unwrap();
        let mut s = SplitStepSolver::new(grid.clone(), p, RampSchedule::constant(p.v0())).unwrap();
        s.advance(ex.sample(&grid, 0.0), period, period / steps).unwrap()
    };
    let coarse = run(64, 2000.0);
    let fine = run(128, 2000.0);
    let half = run(64, 4000.0);
    let spatial = fine
        .values
        .iter()
        .step_by(2)
        .zip(&coarse.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let temporal = half.values.iter().zip(&coarse.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(spatial < temporal, "{spatial} vs {temporal}");
}

#[test]
fn noiseless_run_tracks_the_exact_state() {
    let p = left();
    let s = EnsembleSettings {
        grid: Grid::for_lattice(128, 4.0, K).unwrap(),
        dt: p.period() / 4000.0,
        t_end: 2.0 * p.period(),
        sample_interval: p.period() / 50.0,
        epsilon: 0.0,
        seeds: vec![0],
    };
    let run = perturbed_run(&p, &s, 0).unwrap();
    assert!(run.failure.is_none());
    assert!(run.trace.fidelity.iter().all(|&f| f > 1.0 - 1e-9));
    assert!(run.trace.max_norm_drift() < 1e-10);
}

#[test]
fn operator_identities_hold_at_random_times() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = Grid::for_lattice(128, 4.0, K).unwrap();
    for (v0, ef) in [(-0.3, 3.0), (-0.5, 1.2), (-1.0, 2.5)] {
        let ex = ExactState::new(make_balanced_params(1.0, v0 * K, ef * K, K, Branch::Plus).unwrap()).unwrap();
        assert_eq!(ex.region(), RegionClass::PhaseContinuing);
        let ops = StabilityOperators::new(ex, grid.clone(), StabilityConfig::default()).unwrap();
        let period = ex.params().period();
        for _ in 0..5 {
            let t = rng.random_range(0.0..period);
            let (l1, s) = ops.background_residuals(t).unwrap();
            assert!(l1 < 1e-6 && s < 1e-6, "V0 = {v0}k, t = {t}: {l1}, {s}");
        }
    }
}

#[test]
fn linearization_guards() {
    let ex = ExactState::new(left()).unwrap();
    let grid = Grid::for_lattice(64, 4.0, K).unwrap();
    let zero = PerturbationField::zeros(grid.clone(), 0.0);
    let dt = ex.params().period() / 2000.0;
    assert_eq!(linearization_consistency(1e-3, &zero, &ex, 0.5, dt).unwrap(), 0.0);
    let init = PerturbationInit::RandomSmooth { seed: 1, cutoff: 2.0 }.build(&grid, 0.0).unwrap();
    assert!(linearization_consistency(0.0, &init, &ex, 0.5, dt).is_err());
    let jumping = ExactState::new(right()).unwrap();
    assert!(linearization_consistency(1e-3, &init, &jumping, 0.5, dt).is_err());
}

#[test]
fn ramp_up_is_insensitive_to_the_initial_phase() {
    let p = left();
    let half = PI / p.omega();
    let settings = |theta0| RampSettings {
        direction: Direction::Up,
        t_ramp: 2.0 * half,
        t_hold: half,
        theta0,
        grid: Grid::for_lattice(64, 4.0, K).unwrap(),
        dt: p.period() / 2000.0,
        sample_interval: p.period() / 10.0,
    };
    let a = ramp_protocol(&p, &settings(0.0)).unwrap();
    let b = ramp_protocol(&p, &settings(1.3)).unwrap();
    assert!((a.final_fidelity - b.final_fidelity).abs() < 1e-12);
    assert_relative_eq!(a.mean_density, b.mean_density, max_relative = 1e-12);
}
