use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn karcher(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_karcher"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn read_matrices(path: &Path) -> Vec<Vec<Vec<f64>>> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(v["matrices"].clone()).unwrap()
}

#[test]
fn mean_of_scalar_pair() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 1, "matrices": [[[1]], [[4]]]}"#,
    )
    .unwrap();
    let out = karcher(
        &["mean", "e.json", "--solver", "mm", "--out", "m.json"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = read_matrices(&dir.path().join("m.json"));
    assert_eq!(m.len(), 1);
    assert!((m[0][0][0] - 2.0).abs() < 1e-10);

    let trace = fs::read_to_string(dir.path().join("m.trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("iter,objective,grad_norm,log_error,elapsed")
    );
    assert!(lines.count() >= 2);
}

#[test]
fn single_matrix_is_echoed_by_every_solver() {
    let dir = TempDir::new().unwrap();
    let a = [[2.0, 0.5], [0.5, 3.0]];
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 2, "matrices": [[[2.0, 0.5], [0.5, 3.0]]]}"#,
    )
    .unwrap();
    for solver in ["mm", "gd-ls", "gd-fixed"] {
        let out = karcher(&["mean", "e.json", "--solver", solver], dir.path());
        assert_eq!(out.status.code(), Some(0), "{solver}");
        let m = read_matrices(&dir.path().join("mean.json"));
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[0][i][j] - a[i][j]).abs() < 1e-12, "{solver}");
            }
        }
    }
}

#[test]
fn non_symmetric_input_names_the_matrix() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 2, "matrices": [[[1, 0], [0, 1]], [[1, 0.5], [0, 1]]]}"#,
    )
    .unwrap();
    let out = karcher(&["mean", "e.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("matrix 1"), "{err}");
    assert!(!dir.path().join("mean.json").exists());
}

#[test]
fn indefinite_input_reports_the_eigenvalue() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 2, "matrices": [[[1, 2], [2, 1]]]}"#,
    )
    .unwrap();
    let out = karcher(&["mean", "e.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("matrix 0") && err.contains("eigenvalue -1"),
        "{err}"
    );
}

#[test]
fn malformed_and_missing_files_exit_one() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"dim": 2, "matrices": [[[1, 0]]]}"#,
    )
    .unwrap();
    let out = karcher(&["mean", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matrix 0"));
    assert_eq!(
        karcher(&["mean", "nope.json"], dir.path()).status.code(),
        Some(1)
    );
}

#[test]
fn iteration_cap_exits_two() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 1, "matrices": [[[1]], [[1000]]]}"#,
    )
    .unwrap();
    let out = karcher(&["mean", "e.json", "--max-iters", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("mean.json").exists());
}

#[test]
fn bad_solver_flag_is_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 1, "matrices": [[[1]]]}"#,
    )
    .unwrap();
    let out = karcher(&["mean", "e.json", "--solver", "newton"], dir.path());
    assert_ne!(out.status.code(), Some(0));
    let out = karcher(&["mean", "e.json", "--c", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bundled_small_spec() {
    let dir = TempDir::new().unwrap();
    let spec = specs_dir().join("fig1_small.json");
    let out = karcher(&["bench", spec.to_str().unwrap(), "--out", "r"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("iter,mm,gd_ls_nu_0.25"), "{header}");
    assert!(header.contains("gd_fixed_nu_1"));
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(sidecar["runs"], 5);
    assert_eq!(sidecar["n"], 10);
}

#[test]
fn bundled_rescale_spec() {
    let dir = TempDir::new().unwrap();
    let spec = specs_dir().join("fig3_rescale.json");
    let out = karcher(&["bench", spec.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("fig3_rescale.csv").exists());
    assert!(dir.path().join("fig3_rescale.json").exists());
}

#[test]
fn one_run_one_matrix_spec_gives_two_rows() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("s.json"),
        r#"{"n": 1, "p": 3, "spectrum": {"kind": {"uniform": {"lo": 1, "hi": 10}}},
            "runs": 1, "seed": 3, "solvers": [{"kind": "mm"}]}"#,
    )
    .unwrap();
    let out = karcher(&["bench", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn invalid_spec_names_the_field() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("s.json"),
        r#"{"n": 2, "p": 3, "spectrum": {"kind": {"uniform": {"lo": 1, "hi": 10}}},
            "runs": 0, "seed": 3, "solvers": [{"kind": "mm"}]}"#,
    )
    .unwrap();
    let out = karcher(&["bench", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("runs"));

    fs::write(dir.path().join("s.json"), r#"{"n": 2, "p": 3}"#).unwrap();
    let out = karcher(&["bench", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectrum"));
}

#[test]
fn check_passes_on_a_clean_build() {
    let dir = TempDir::new().unwrap();
    let out = karcher(&["check"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
}

#[test]
fn check_catches_cancelling_weight() {
    let dir = TempDir::new().unwrap();
    let out = karcher(&["check", "--inject-fault", "g2-cancellation"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn written_mean_round_trips() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("e.json"),
        r#"{"dim": 2, "matrices": [[[2, 0.3], [0.3, 1]], [[5, -1], [-1, 4]], [[1, 0], [0, 9]]]}"#,
    )
    .unwrap();
    assert_eq!(
        karcher(&["mean", "e.json"], dir.path()).status.code(),
        Some(0)
    );
    // the mean file is itself a valid one-matrix ensemble
    let out = karcher(&["mean", "mean.json", "--out", "again.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        read_matrices(&dir.path().join("mean.json")),
        read_matrices(&dir.path().join("again.json"))
    );
}
