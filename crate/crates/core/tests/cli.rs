use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn dwms(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dwms")).args(args).output().expect("spawn dwms")
}

fn run_mode(mode: &str, config: &Path, out: &Path) -> std::process::Output {
    dwms(&[mode, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "1"])
}

#[test]
fn verify_on_free_potential_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_mode("verify", &configs().join("verify_free.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let passes = report.lines().filter(|l| l.starts_with("PASS")).count();
    assert!(passes >= 15, "{report}");
    assert!(!report.contains("FAIL"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "dwms-manifest/1");
    assert_eq!(manifest["all_passed"], true);
    assert!(manifest["settings"]["tail_threshold"].is_number());
    assert!(!manifest["grids"].as_array().unwrap().is_empty());
}

#[test]
fn single_scatter_matches_partial_wave_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_mode("single_scatter", &configs().join("single_square_well.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_path(dir.path().join("cross_sections.csv")).unwrap();
    let headers = rd.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (si, sr) = (col("sigma_integrated"), col("sigma_reference"));
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let a: f64 = rec[si].parse().unwrap();
        let b: f64 = rec[sr].parse().unwrap();
        assert!((a - b).abs() < 1e-4 * b, "{a} vs {b}");
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn unknown_mode_is_a_usage_error() {
    let out = dwms(&["photoionize", "--config", "x.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("photoionize"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema = \"dwms-run/1\"\npotential = \"free.toml\"\nl_max = \"six\"\n").unwrap();
    let out = run_mode("verify", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn mode_mismatch_and_bad_energies_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_mode("single_scatter", &configs().join("verify_free.toml"), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let cfg = dir.path().join("neg.toml");
    let pot = configs().join("free.toml");
    std::fs::write(
        &cfg,
        format!("schema = \"dwms-run/1\"\npotential = {:?}\n[energies]\nvalues = [-0.5]\n", pot.to_str().unwrap()),
    )
    .unwrap();
    let out = run_mode("verify", &cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("above the asymptote"));
}

#[test]
fn output_is_byte_identical_across_runs_and_workers() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = configs().join("single_square_well.toml");
    assert!(run_mode("single_scatter", &cfg, a.path()).status.success());
    let out = dwms(&["single_scatter", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "--workers", "3"]);
    assert!(out.status.success());
    for f in ["cross_sections.csv", "manifest.json", "report.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}
