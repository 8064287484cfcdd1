//! Command-line front end used by the `floquet` binary.
//!
//! ```text
//! floquet <classify|exact|evolve|ramp|sweep|linstab> [CONFIG] [--set key=value]... [--seed N] [--out DIR]
//! ```
//!
//! Failures print one JSON object `{"error": <category>, "message": ...}` on
//! stderr and exit nonzero.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{ExperimentKind, ExperimentSpec, RampDirection};
use crate::error::{Error, Result};
use crate::experiments::run_experiment;
use crate::params::classify_region;

#[derive(Debug, Parser)]
#[command(name = "floquet", version, about = "Exact Floquet states of a driven 1D condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the balance-region class of the configured parameters.
    Classify(Common),
    /// Write exact density/phase/velocity maps and the node list.
    Exact(Common),
    /// Evolve ψ_exact plus white noise and record fidelity traces.
    Evolve(Common),
    /// Ramp the potential between the Floquet and the uniform state.
    Ramp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
    /// Classify a (V0, EF) grid and probe the fidelity of each cell.
    Sweep(Common),
    /// Evolve linearised perturbations and report blow-up.
    Linstab(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file, or a manifest.json from an earlier run.
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set noise.seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set noise.seed=N`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for `--set output.dir=DIR`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Down,
    Up,
}

impl Common {
    fn load(&self) -> Result<ExperimentSpec> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("noise.seed={seed}"));
        }
        if let Some(out) = &self.out {
            let text = out
                .to_str()
                .ok_or_else(|| Error::Config("output directory is not valid UTF-8".into()))?;
            overrides.push(format!("output.dir={}", toml_string(text)));
        }
        ExperimentSpec::load(self.config.as_deref(), &overrides)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let (common, kind) = match &cli.command {
        Command::Classify(c) => {
            let spec = c.load()?;
            let region = match spec.floquet_params() {
                Ok(p) => classify_region(&p).as_str(),
                Err(Error::InfeasibleParameters(_)) => "infeasible",
                Err(e) => return Err(e),
            };
            writeln!(stdout, "{region}")?;
            return Ok(());
        }
        Command::Exact(c) => (c, None),
        Command::Evolve(c) => (c, Some(ExperimentKind::PerturbedEvolution)),
        Command::Ramp { common, .. } => (common, None),
        Command::Sweep(c) => (c, Some(ExperimentKind::RegionSweep)),
        Command::Linstab(c) => (c, Some(ExperimentKind::LinStab)),
    };
    let mut spec = common.load()?;
    spec.experiment = match (&cli.command, kind) {
        (_, Some(k)) => k,
        (Command::Exact(_), None) => ExperimentKind::ExactFields,
        (Command::Ramp { direction, .. }, None) => {
            if let Some(d) = direction {
                spec.ramp.direction = match d {
                    DirectionArg::Down => RampDirection::Down,
                    DirectionArg::Up => RampDirection::Up,
                };
            }
            match spec.ramp.direction {
                RampDirection::Down => ExperimentKind::RampDown,
                RampDirection::Up => ExperimentKind::RampUp,
            }
        }
        _ => unreachable!("every subcommand maps to an experiment"),
    };
    let out = run_experiment(&spec)?;
    writeln!(
        stdout,
        "{}",
        json!({ "dir": out.dir, "outputs": out.files, "summary": out.summary })
    )?;
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    cli_main_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn cli_main_with<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = json!({ "error": "usage", "message": e.to_string().trim() });
            let _ = writeln!(stderr, "{msg}");
            return 2;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let msg = json!({ "error": e.category(), "message": e.to_string() });
            let _ = writeln!(stderr, "{msg}");
            e.exit_code()
        }
    }
}
