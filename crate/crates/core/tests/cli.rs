use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use bec_floquet::cli::cli_main_with;
use bec_floquet::experiments::read_manifest;
use bec_floquet::io::{read_snapshot_binary, read_snapshot_csv, write_snapshot_binary, write_snapshot_csv};
use bec_floquet::{ExactState, Grid, ReferenceState, make_balanced_params, Branch};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("floquet").chain(args.iter().copied());
    let code = cli_main_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn run_ok(args: &[&str]) -> Value {
    let r = run(args);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    serde_json::from_str(r.stdout.trim()).unwrap()
}

#[test]
fn classify_prints_the_region() {
    let left = config("continuing.toml");
    let right = config("jumping.toml");
    assert_eq!(run(&["classify", left.to_str().unwrap()]).stdout.trim(), "phase-continuing");
    assert_eq!(run(&["classify", right.to_str().unwrap()]).stdout.trim(), "phase-jumping");
    let r = run(&["classify", left.to_str().unwrap(), "--set", "params.EF_over_g=-1.0"]);
    assert_eq!((r.code, r.stdout.trim()), (0, "infeasible"));
}

#[test]
fn missing_config_is_a_parse_error() {
    let r = run(&["exact", "/nonexistent/run.toml"]);
    assert_ne!(r.code, 0);
    let err: Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert_eq!(err["error"], "config-parse");
}

#[test]
fn unknown_key_is_rejected() {
    let r = run(&["classify", "--set", "params.V2_over_g=1.0"]);
    assert_ne!(r.code, 0);
    assert!(r.stderr.contains("config-parse"), "{}", r.stderr);
}

#[test]
fn usage_errors_exit_with_two() {
    let r = run(&["teleport"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("usage"));
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn infeasible_run_fails_with_its_category() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["exact", "--set", "params.EF_over_g=-1.0", "--out", dir.path().to_str().unwrap()]);
    assert_ne!(r.code, 0);
    let err: Value = serde_json::from_str(r.stderr.trim()).unwrap();
    assert_eq!(err["error"], "infeasible-parameters");
}

fn read_all(dir: &Path, files: &[String]) -> Vec<Vec<u8>> {
    files.iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

fn file_list(v: &Value) -> Vec<String> {
    v["outputs"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

#[test]
fn exact_fields_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("jumping.toml");
    let ra = run_ok(&["exact", cfg.to_str().unwrap(), "--out", a.path().to_str().unwrap()]);
    let rb = run_ok(&["exact", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    let files = file_list(&ra);
    assert_eq!(files, file_list(&rb));
    assert!(files.iter().any(|f| f == "exact_fields.csv"));
    assert_eq!(read_all(a.path(), &files), read_all(b.path(), &files));

    let nodes = fs::read_to_string(a.path().join("exact_nodes.csv")).unwrap();
    let rows: Vec<_> = nodes.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "x,t,charge,n,l,branch");
    assert!(rows.len() > 1);
}

#[test]
fn manifest_reruns_to_identical_outputs() {
    let first = tempfile::tempdir().unwrap();
    let cfg = config("continuing.toml");
    let summary = run_ok(&[
        "evolve",
        cfg.to_str().unwrap(),
        "--set",
        "run.periods=1",
        "--set",
        "noise.realizations=2",
        "--seed",
        "11",
        "--out",
        first.path().to_str().unwrap(),
    ]);
    let manifest_path = first.path().join("manifest.json");
    let manifest = read_manifest(&manifest_path).unwrap();
    assert_eq!(manifest["experiment"], "perturbed-evolution");
    assert_eq!(manifest["seed"], 11);

    let second = tempfile::tempdir().unwrap();
    let again = run_ok(&["evolve", manifest_path.to_str().unwrap(), "--out", second.path().to_str().unwrap()]);
    let files = file_list(&summary);
    assert_eq!(files, file_list(&again));
    assert_eq!(read_all(first.path(), &files), read_all(second.path(), &files));
    assert_eq!(summary["summary"], again["summary"]);
}

#[test]
fn sweep_rows_partition_into_the_four_classes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sweep.toml");
    run_ok(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--set",
        "sweep.V0_steps=5",
        "--set",
        "sweep.EF_steps=5",
        "--set",
        "sweep.probe_periods=0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<_> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "region").unwrap();
    let allowed: BTreeSet<_> = ["phase-continuing", "phase-jumping", "boundary", "infeasible"].into();
    let mut seen = BTreeSet::new();
    let mut count = 0;
    for row in rows {
        let region = row.split(',').nth(col).unwrap();
        assert!(allowed.contains(region), "unclassified row: {row}");
        seen.insert(region.to_string());
        count += 1;
    }
    assert_eq!(count, 25);
    assert!(seen.len() >= 3, "{seen:?}");
}

#[test]
fn linstab_reports_blowup_for_the_jumping_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("linstab.toml");
    let out = run_ok(&["linstab", cfg.to_str().unwrap(), "--set", "linstab.periods=0.25", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out["summary"]["region"], "phase-jumping");
    assert_eq!(out["summary"]["any_blown_up"], true, "{}", out["summary"]);
}

#[test]
fn snapshot_formats_round_trip() {
    let p = make_balanced_params(1.0, -0.6, 4.7, std::f64::consts::FRAC_PI_2, Branch::Plus).unwrap();
    let field = ExactState::new(p).unwrap().sample(&Grid::new(64, 4.0).unwrap(), 0.37);

    let mut bin = Vec::new();
    write_snapshot_binary(&mut bin, &field).unwrap();
    let back = read_snapshot_binary(bin.as_slice()).unwrap();
    assert_eq!(back.values, field.values);
    assert_eq!(back.t, field.t);

    let mut csv = Vec::new();
    write_snapshot_csv(&mut csv, &field, &["a comment".to_string()]).unwrap();
    let back = read_snapshot_csv(csv.as_slice()).unwrap();
    assert_eq!(back.values, field.values);
    assert_eq!(back.grid, field.grid);

    bin.push(0);
    assert!(read_snapshot_binary(bin.as_slice()).is_err());
}
