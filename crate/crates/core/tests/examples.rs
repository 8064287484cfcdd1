// Every example runs to completion as part of the test suite.

mod balance_and_regions {
    include!("../examples/balance_and_regions.rs");
}

mod config_and_manifest {
    include!("../examples/config_and_manifest.rs");
}

mod exact_fields {
    include!("../examples/exact_fields.rs");
}

mod fidelity_contrast {
    include!("../examples/fidelity_contrast.rs");
}

mod linear_stability {
    include!("../examples/linear_stability.rs");
}

mod ramp_transitions {
    include!("../examples/ramp_transitions.rs");
}

mod region_sweep {
    include!("../examples/region_sweep.rs");
}

mod split_step_convergence {
    include!("../examples/split_step_convergence.rs");
}

mod vortex_detection {
    include!("../examples/vortex_detection.rs");
}

#[test]
fn balance_and_regions() {
    balance_and_regions::main().unwrap();
}

#[test]
fn config_and_manifest() {
    config_and_manifest::main().unwrap();
}

#[test]
fn exact_fields() {
    exact_fields::main().unwrap();
}

#[test]
fn fidelity_contrast() {
    fidelity_contrast::main().unwrap();
}

#[test]
fn linear_stability() {
    linear_stability::main().unwrap();
}

#[test]
fn ramp_transitions() {
    ramp_transitions::main().unwrap();
}

#[test]
fn region_sweep() {
    region_sweep::main().unwrap();
}

#[test]
fn split_step_convergence() {
    split_step_convergence::main().unwrap();
}

#[test]
fn vortex_detection() {
    vortex_detection::main().unwrap();
}
