use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfl_core::table::Table;

fn cfl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfl"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn cfl")
}

fn goldens() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("goldens")
}

fn copy_goldens(to: &Path) {
    for entry in std::fs::read_dir(goldens()).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
    }
}

fn error_category(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(text.lines().last().unwrap_or("{}")).unwrap();
    v["error"]["category"].as_str().unwrap_or("").to_string()
}

#[test]
fn compare_defaults_routes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfl(&["compare", "--out", "c.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = Table::from_csv(&std::fs::read_to_string(dir.path().join("c.csv")).unwrap()).unwrap();
    assert_eq!(t.columns(), ["route", "delta_e", "rel_gap_vs_spectral"]);
    let gaps = t.column_values("rel_gap_vs_spectral").unwrap();
    assert!(gaps[1] < 1e-10, "kubo_freq gap {}", gaps[1]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["experiment"], "compare");
    assert_eq!(meta["inputs"]["eta"], "0.1");
    assert!(meta["diagnostics"]["truncation_tail"].as_f64().unwrap() < 1e-10);
    assert!(meta["wall_time_s"].as_f64().is_some());
}

#[test]
fn temperature_sweep_vanishes_toward_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfl(
        &["sweep-temperature", "--config", goldens().join("sweep_temperature.cfg").to_str().unwrap(), "--out", "t.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = Table::from_csv(&std::fs::read_to_string(dir.path().join("t.csv")).unwrap()).unwrap();
    let de = t.column_values("delta_e_spectral").unwrap();
    assert!(de.windows(2).all(|w| w[1] < w[0]), "{de:?}");
    assert_eq!(*de.last().unwrap(), 0.0);
}

#[test]
fn zero_eta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfl(&["compare", "--set", "eta=0", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "config");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfl(
        &["compare", "--set", "n_max=3", "--set", "routes=spectral", "--out", "missing/dir/x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_category(&out), "io");
}

#[test]
fn short_horizon_is_a_convergence_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfl(
        &["compare", "--set", "n_max=3", "--set", "horizon=0,20", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_category(&out), "convergence");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.cfg"), "experiment = compare\nn_max = 3\neta = 0.2\nroutes = spectral\nformat = csv\n").unwrap();
    let out = cfl(
        &["compare", "--config", "a.cfg", "--set", "eta=0.3", "--format", "json", "--out", "a.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(v["columns"][0], "route");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["inputs"]["eta"], "0.3");
    assert_eq!(meta["inputs"]["format"], "json");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = goldens().join("sweep_detuning.cfg");
    let cfg = cfg.to_str().unwrap();
    for (name, jobs) in [("a.csv", None), ("b.csv", None), ("c.csv", Some("1"))] {
        let mut args = vec!["sweep-detuning", "--config", cfg, "--out", name];
        if let Some(j) = jobs {
            args.extend(["--jobs", j]);
        }
        assert!(cfl(&args, dir.path()).status.success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
}

#[test]
fn shipped_goldens_pass() {
    let dir = tempfile::tempdir().unwrap();
    copy_goldens(dir.path());
    let out = cfl(&["golden-check", "--goldens", dir.path().to_str().unwrap()], dir.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report.lines().filter(|l| l.starts_with("PASS ")).count(), 6, "{report}");
}

#[test]
fn perturbed_golden_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    copy_goldens(dir.path());
    let path = dir.path().join("sweep_eta.cfg");
    let text = std::fs::read_to_string(&path).unwrap().replace("gamma = 1.0", "gamma = 1.001");
    std::fs::write(&path, text).unwrap();
    let out = cfl(&["golden-check", "--goldens", dir.path().to_str().unwrap()], dir.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(5));
    let failed: Vec<&str> = report.lines().filter(|l| l.starts_with("FAIL ")).collect();
    assert_eq!(failed.len(), 1, "{report}");
    assert!(failed[0].starts_with("FAIL sweep_eta:"), "{report}");
}

#[test]
fn missing_tolerances_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    copy_goldens(dir.path());
    std::fs::remove_file(dir.path().join("tolerances.txt")).unwrap();
    let out = cfl(&["golden-check", "--goldens", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(error_category(&out), "golden");
}

#[test]
fn missing_golden_table_fails() {
    let dir = tempfile::tempdir().unwrap();
    copy_goldens(dir.path());
    std::fs::remove_file(dir.path().join("propagate.csv")).unwrap();
    let out = cfl(&["golden-check", "--goldens", dir.path().to_str().unwrap()], dir.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("FAIL propagate: missing golden"), "{report}");
}
