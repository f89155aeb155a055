//! End-to-end runs of the `levy-lattice` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use levy_lattice::discretization::Discretization;
use levy_lattice::{LatticeSpec, LevyMeasure, LevyModel, SchemeKind};

const BROWNIAN: &str = r#"
version = 1
h = [1.0, 0.5, 0.25]
m = 5.0
t = 1.0
gnuplot = true
[model]
family = "brownian"
sigma2 = 1.0
mu = 1.0
[density]
window = [-2.0, 4.0]
expm = true
"#;

fn run(dir: &Path, config: &str, command: &str, out: &str) -> (i32, String, String) {
    let path = dir.join(format!("{out}.toml"));
    fs::write(&path, config).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_levy-lattice"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join(out))
        .arg(command)
        .output()
        .unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8(output.stdout).unwrap(),
        String::from_utf8(output.stderr).unwrap(),
    )
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn density_writes_tables_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = run(dir.path(), BROWNIAN, "density", "a");
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("h=")).count(), 3);
    let names: Vec<String> =
        files(&dir.path().join("a")).iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for name in
        ["density_h0.csv", "density_h2.csv", "density_expm_h1.csv", "exact.csv", "density_summary.csv", "density.gp"]
    {
        assert!(names.iter().any(|n| n == name), "{name} missing from {names:?}");
    }
    for path in files(&dir.path().join("a")) {
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("#config_sha256="), "{}", path.display());
    }
    let summary = rows(&dir.path().join("a/density_summary.csv"));
    assert_eq!(summary.len(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), BROWNIAN, "density", "a").0, 0);
    assert_eq!(run(dir.path(), BROWNIAN, "density", "b").0, 0);
    let (a, b) = (files(&dir.path().join("a")), files(&dir.path().join("b")));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn tolerance_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, BROWNIAN).unwrap();
    let sha = |tol: &str, out: &str| {
        let output = Command::new(env!("CARGO_BIN_EXE_levy-lattice"))
            .args(["--config", path.to_str().unwrap(), "--tol", tol, "--out", dir.path().join(out).to_str().unwrap()])
            .arg("density")
            .output()
            .unwrap();
        assert!(output.status.success());
        let text = fs::read_to_string(dir.path().join(out).join("exact.csv")).unwrap();
        text.lines().find(|l| l.starts_with("#config_sha256=")).unwrap().to_string()
    };
    assert_ne!(sha("1e-10", "x"), sha("1e-8", "y"));
}

#[test]
fn empty_step_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = BROWNIAN.replace("h = [1.0, 0.5, 0.25]", "h = []");
    assert_eq!(run(dir.path(), &config, "density", "a").0, 2);
}

#[test]
fn density_without_a_density_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = "version = 1\nh = [0.5]\n[model]\nfamily = \"brownian\"\nsigma2 = 0.0\nmu = 1.0\n";
    let (code, _, stderr) = run(dir.path(), config, "density", "a");
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn bad_versions_and_unknown_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &BROWNIAN.replace("version = 1", "version = 7"), "density", "a").0, 2);
    assert_eq!(run(dir.path(), &BROWNIAN.replace("mu = 1.0", "mu = 1.0\ndrift = 2.0"), "density", "b").0, 2);
    let output = Command::new(env!("CARGO_BIN_EXE_levy-lattice")).arg("density").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn psi_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        "version = 1\nh = [0.5]\nscheme = \"scheme2\"\n[model]\nfamily = \"stable\"\nalpha = 0.5\n[psi]\npoints = 9\n";
    let (code, _, stderr) = run(dir.path(), config, "psi", "a");
    assert_eq!(code, 0, "{stderr}");
    let table = rows(&dir.path().join("a/psi.csv"));
    assert_eq!(table.len(), 9);
    let model = LevyModel::univariate(0.0, 0.0, LevyMeasure::stable(0.5, 1.0).unwrap(), 1).unwrap();
    let disc = Discretization::new(&model, &LatticeSpec::new(0.5, 1, 5.0).unwrap(), SchemeKind::Scheme2).unwrap();
    for row in &table {
        let p: f64 = row[1].parse().unwrap();
        let re: f64 = row[4].parse().unwrap();
        let im: f64 = row[5].parse().unwrap();
        let expected = disc.psi_h(&[p]).unwrap();
        assert!((re - expected.re).abs() <= 1e-13 * (1.0 + expected.norm()), "p={p}: {re} vs {}", expected.re);
        assert!((im - expected.im).abs() <= 1e-13 * (1.0 + expected.norm()));
    }
}

#[test]
fn converge_gate_controls_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = "version = 1\n[converge]\nfixtures = [\"gaussian\"]\n";
    let (code, stdout, stderr) = run(dir.path(), config, "converge", "a");
    assert_eq!(code, 0, "{stdout}{stderr}");
    assert!(dir.path().join("a/converge_summary.csv").exists());
    let config = "version = 1\n[converge]\nfixtures = [\"gaussian\"]\nexpected_order = 3.0\n";
    assert_eq!(run(dir.path(), config, "converge", "b").0, 1);
}

#[test]
fn price_single_step_and_rejected_dampening() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
version = 1
h = [0.5]
t = 0.25
[model]
family = "cgmy"
c = 0.5
lambda_plus = 3.5
lambda_minus = 2.0
alpha = 0.5
[price]
s0 = 100.0
r = 0.04
strikes = [80.0, 100.0, 120.0]
"#;
    let (code, _, stderr) = run(dir.path(), config, "price", "a");
    assert_eq!(code, 0, "{stderr}");
    let table = rows(&dir.path().join("a/price.csv"));
    assert_eq!(table.len(), 1);
    assert_eq!(table[0].len(), 7);
    let prices: Vec<f64> = table[0][4..].iter().map(|v| v.parse().unwrap()).collect();
    assert!(prices.windows(2).all(|w| w[0] < w[1]));
    assert!(prices.iter().all(|&p| p > 0.0));
    let (code, _, _) = run(dir.path(), &config.replace("lambda_plus = 3.5", "lambda_plus = 1.0"), "price", "b");
    assert_eq!(code, 2);
}
