//! Process-level checks of the ddc binary: exit codes, reproducible
//! artifacts, and emitted datasets that survive a save/load round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ddc_core::data::{load_dataset, save_dataset};
use ddc_core::error::DdcError;

fn ddc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddc"))
        .args(args)
        .output()
        .expect("failed to spawn the ddc binary")
}

fn run_example1_into(dir: &Path) -> Output {
    let out = ddc(&["run", "example1", "--out", dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "run example1 failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn sorted_file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn example1_artifacts_are_byte_identical_across_reruns() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_example1_into(a.path());
    run_example1_into(b.path());

    let names = sorted_file_names(a.path());
    assert_eq!(names, sorted_file_names(b.path()));
    assert!(names.iter().any(|n| n.ends_with(".csv")));
    assert!(names.iter().any(|n| n.ends_with(".svg")));
    for name in &names {
        let lhs = fs::read(a.path().join(name)).unwrap();
        let rhs = fs::read(b.path().join(name)).unwrap();
        assert_eq!(lhs, rhs, "{name} differs between identical runs");
    }
}

#[test]
fn emitted_dataset_reloads_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    run_example1_into(dir.path());

    let clean_csv = dir.path().join("example1_clean.ddc.csv");
    let ds = load_dataset(&clean_csv).unwrap();
    assert_eq!(ds.provenance().to_string(), "clean");
    assert_eq!(ds.input_dim(), 1);
    assert_eq!(ds.measurement_dim(), 3);
    assert_eq!(ds.horizon(), 16);
    assert_eq!(ds.measurements().len(), 17);

    let copy_csv = dir.path().join("copy.ddc.csv");
    save_dataset(&ds, &copy_csv).unwrap();
    assert_eq!(
        fs::read(&clean_csv).unwrap(),
        fs::read(&copy_csv).unwrap(),
        "re-saving a loaded dataset must be byte-identical"
    );

    let attacked = load_dataset(&dir.path().join("example1_attacked.ddc.csv")).unwrap();
    assert_eq!(attacked.provenance().to_string(), "attacked:fake-system");
    assert_eq!(attacked.horizon(), ds.horizon());
}

#[test]
fn detect_separates_the_loud_and_quiet_forgeries() {
    let dir = tempfile::tempdir().unwrap();
    run_example1_into(dir.path());

    let loud = ddc(&[
        "detect",
        dir.path().join("example1_attacked.ddc.csv").to_str().unwrap(),
        "--gamma",
        "1.0",
    ]);
    assert!(loud.status.success());
    let loud_json: serde_json::Value = serde_json::from_slice(&loud.stdout).unwrap();
    assert_eq!(loud_json["alarm"], serde_json::Value::Bool(true));

    let quiet = ddc(&[
        "detect",
        dir.path().join("example1_quiet.ddc.csv").to_str().unwrap(),
        "--gamma",
        "1.0",
    ]);
    assert!(quiet.status.success());
    let quiet_json: serde_json::Value = serde_json::from_slice(&quiet.stdout).unwrap();
    assert_eq!(quiet_json["alarm"], serde_json::Value::Bool(false));
    assert!(quiet_json["ratio"].as_f64().unwrap() <= 0.5);
}

#[test]
fn invalid_kappa_exits_with_the_argument_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = ddc(&[
        "run",
        "example1",
        "--kappa",
        "3.0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "stderr was: {stderr}");
}

#[test]
fn missing_dataset_exits_with_the_io_code() {
    let out = ddc(&["detect", "/nonexistent/trace.ddc.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn error_classes_map_to_the_documented_exit_codes() {
    assert_eq!(DdcError::InvalidArgument(String::new()).exit_code(), 2);
    assert_eq!(DdcError::Precondition(String::new()).exit_code(), 2);
    assert_eq!(DdcError::Infeasible(String::new()).exit_code(), 3);
    assert_eq!(DdcError::SolverFailure(String::new()).exit_code(), 3);
    assert_eq!(DdcError::NumericalFailure(String::new()).exit_code(), 3);
    assert_eq!(DdcError::GenerationFailure(String::new()).exit_code(), 3);
    assert_eq!(
        DdcError::Io(std::io::Error::other("gone")).exit_code(),
        4
    );
    assert_eq!(
        DdcError::Parse {
            line: 1,
            msg: String::new()
        }
        .exit_code(),
        4
    );
}
