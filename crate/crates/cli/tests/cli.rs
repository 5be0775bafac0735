use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wonderchar(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wonderchar"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("WONDERCHAR_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

/// Σ 1/|1 - dΦ| over the fixed lines [1:0] and [0:1] of diag(a, 1) rescaled
/// to determinant one, where dΦ takes the values a and 1/a.
fn diagonal_flat_trace(a: f64) -> f64 {
    1.0 / (1.0 - a).abs() + 1.0 / (1.0 - 1.0 / a).abs()
}

#[test]
fn fixed_points_of_a_diagonal_element() {
    let dir = tempfile::tempdir().unwrap();
    let o = wonderchar(dir.path(), &["fixed-points", "--model", "p1", "--g", "diag:2,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("fixed_points.csv"));
    assert_eq!(rows.len(), 2);
    let contributions: f64 = rows.iter().map(|r| r[6].parse::<f64>().unwrap()).sum();
    let want = diagonal_flat_trace(2.0);
    assert_eq!(want, 3.0);
    assert!((contributions - want).abs() < 1e-12, "{rows:?}");
    assert!(stdout(&o).contains("flat trace: 3\n"), "{}", stdout(&o));
    for r in &rows {
        assert!(r[7].parse::<f64>().unwrap() < 1e-12, "fixed-point residual {r:?}");
    }
    assert!(dir.path().join("fixed_points.txt").exists());
    assert!(dir.path().join("fixed_points.dat").exists());
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn non_transversal_element_reports_undefined_flat_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = wonderchar(dir.path(), &["fixed-points", "--model", "p1", "--g", "rot:0.7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(csv_rows(&dir.path().join("fixed_points.csv")).len(), 0);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["fixed-points", "--model", "quadric"],
        &["trace", "--zeta", "1:2"],
        &["trace", "--tol-lac", "0"],
        &["fixed-points", "--model", "p1", "--g", "torus:2,3"],
        &["verify-fpf", "--model", "toric:r=1"],
        &["selftest", "--only", "A99"],
    ];
    for args in cases {
        let o = wonderchar(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = wonderchar(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_lacunarity_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let ok = wonderchar(dir.path(), &["symbol", "--model", "toric:r=1"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("PASS"));
    let strict = wonderchar(dir.path(), &["symbol", "--model", "toric:r=1", "--tol-lac", "1e-30"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("FAIL"));
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let runs: [&[&str]; 3] = [
        &["transform", "--model", "toric:r=2", "--xi-grid", "4,0.5"],
        &["trace", "--model", "toric:r=1", "--zeta", "0:1:3", "--chart-breakdown"],
        &["fixed-points", "--model", "p1", "--g", "mat:3,1,0.5,1", "--seed", "11"],
    ];
    for args in runs {
        let (oa, ob) = (wonderchar(a.path(), args), wonderchar(b.path(), args));
        assert_eq!(oa.status.code(), Some(0), "{args:?}: {}", stderr(&oa));
        assert_eq!(oa.stdout, ob.stdout);
    }
    for name in ["transform.csv", "trace.csv", "fixed_points.csv", "transform.dat"] {
        let (x, y) = (fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn config_file_matches_flags() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let flags = wonderchar(a.path(), &["trace", "--model", "toric:r=1", "--zeta", "0.5", "--quad", "nodes=20"]);
    assert_eq!(flags.status.code(), Some(0), "{}", stderr(&flags));
    let cfg = a.path().join("config.json");
    let from_file = wonderchar(b.path(), &["trace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    assert_eq!(fs::read(a.path().join("trace.csv")).unwrap(), fs::read(b.path().join("trace.csv")).unwrap());
    assert_eq!(fs::read(&cfg).unwrap(), fs::read(b.path().join("config.json")).unwrap());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wonderchar"))
        .args(["fixed-points", "--model", "p1"])
        .env("WONDERCHAR_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("fixed_points.csv").exists());
}

#[test]
fn help_documents_csv_columns() {
    for sub in ["transform", "symbol", "kernel", "trace", "fixed-points", "verify-fpf", "selftest"] {
        let o = Command::new(env!("CARGO_BIN_EXE_wonderchar")).args([sub, "--help"]).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("CSV columns"), "{sub}");
    }
}

#[test]
fn selftest_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = wonderchar(dir.path(), &["selftest", "--only", "A3,A4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rows = csv_rows(&dir.path().join("selftest.csv"));
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["A3", "A4"]);
    assert!(rows.iter().all(|r| r[1] == "true"));
}

#[test]
fn selftest_on_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = wonderchar(dir.path(), &["selftest"]);
    let text = stdout(&o);
    println!("{text}");
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("9 of 9 criteria passed"));
}
