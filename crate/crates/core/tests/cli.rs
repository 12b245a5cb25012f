use std::fs;
use std::path::{Path, PathBuf};

use torus_hjb::cli::{run, run_command};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(format!("{name}.toml"))
}

fn report_field(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    text.lines()
        .find_map(|l| {
            let (k, v) = l.split_once('=')?;
            (k.trim() == key).then(|| v.trim().to_string())
        })
        .unwrap_or_else(|| panic!("no field {key} in\n{text}"))
}

#[test]
fn check_exit_status_follows_validity() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_command("check", &config("eikonal"), out.path(), &[]), 0);
    assert_eq!(report_field(out.path(), "valid"), "true");
    let out = tempfile::tempdir().unwrap();
    assert_ne!(run_command("check", &config("small_c0"), out.path(), &[]), 0);
    assert_eq!(report_field(out.path(), "valid"), "false");
}

#[test]
fn missing_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("eikonal")).unwrap().replace("m = 2.0\n", "");
    let path = dir.path().join("broken.toml");
    fs::write(&path, text).unwrap();
    assert_eq!(run_command("check", &path, &dir.path().join("out"), &[]), 1);
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn usage_errors() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_command("check", &config("eikonal"), out.path(), &["--frobnicate"]), 2);
    assert_eq!(run(["torus-hjb", "integrate"]), 2);
    assert_eq!(run(["torus-hjb"]), 2);
    assert_eq!(run(["torus-hjb", "check"]), 1);
}

#[test]
fn mather_on_trivial_model_reports_zero() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_command("mather", &config("trivial"), out.path(), &[]), 0);
    let value: f64 = report_field(out.path(), "value").parse().unwrap();
    assert!(value.abs() < 1e-7, "{value}");
    for f in ["mather_atoms.csv", "mather_projection.csv", "corrector.csv", "stationary_constraints.triplets"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "mather");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn verify_profile_writes_a_gap_table() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_command("verify-profile", &config("eikonal"), out.path(), &[]), 0);
    let gap: f64 = report_field(out.path(), "gap").parse().unwrap();
    let budget: f64 = report_field(out.path(), "budget").parse().unwrap();
    assert!(gap <= budget, "{gap} > {budget}");
    let text = fs::read_to_string(out.path().join("report.txt")).unwrap();
    let table = text.split("## horizons").nth(1).unwrap();
    assert_eq!(table.lines().filter(|l| !l.trim().is_empty()).count(), 1 + 3);
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("trivial")).unwrap()
        + "\n[initial]\nname = \"random\"\nscale = 1.0\n";
    let path = dir.path().join("random.toml");
    fs::write(&path, text).unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run_command("solve", &path, &a, &["--seed", "7"]), 0);
    assert_eq!(run_command("solve", &path, &b, &["--seed", "7", "--jobs", "1"]), 0);
    assert_eq!(run_command("solve", &path, &c, &["--seed", "8"]), 0);
    let read = |d: &Path| fs::read(d.join("snapshot_0001.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn tol_override_is_recorded() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run_command("profile", &config("trivial"), out.path(), &["--tol", "1e-9"]), 0);
    assert_eq!(report_field(out.path(), "tol"), "1.000000e-9");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tol"], 1e-9);
    assert_eq!(manifest["seed"], 0);
}
