// Drives a run from a TOML config, then re-runs it from the emitted manifest
// and checks that the outputs are byte-identical.

use bec_floquet::config::ExperimentSpec;
use bec_floquet::experiments::run_experiment;

const CONFIG: &str = r#"
experiment = "perturbed-evolution"
params.V0_over_g = -2.0
params.EF_over_g = 0.5
run.periods = 1.0
noise.seed = 42
noise.realizations = 2
"#;

pub fn main() -> anyhow::Result<()> {
    let root = tempfile::tempdir()?;
    let mut spec = ExperimentSpec::from_toml_str(CONFIG)?;
    spec.output.dir = root.path().join("first");
    let first = run_experiment(&spec)?;
    println!("first run: {:?}", first.files);
    println!("summary: {}", first.summary["mean_final_fidelity"]);

    let manifest = first.dir.join("manifest.json");
    let second_dir = root.path().join("second");
    let overrides = [format!("output.dir = {:?}", second_dir.to_str().unwrap())];
    let again = ExperimentSpec::load(Some(&manifest), &overrides)?;
    let second = run_experiment(&again)?;
    for name in &first.files {
        let same = std::fs::read(first.dir.join(name))? == std::fs::read(second.dir.join(name))?;
        println!("{name}: identical = {same}");
    }
    Ok(())
}
