use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dampwave::model::RunConfig;

fn dampwave(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampwave"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_all_passes_for_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(&["verify-all"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    for stage in ["cap", "neumann", "eigen", "quasimode", "resolvent", "evolve"] {
        assert!(stdout.lines().any(|l| l.starts_with("PASS") && l.contains(stage)), "{stage} missing:\n{stdout}");
    }
    assert!(stdout.contains(" 0 failed"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    for files in manifest["outputs"].as_object().unwrap().values() {
        for f in files.as_array().unwrap() {
            assert!(dir.path().join(f.as_str().unwrap()).exists());
        }
    }
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(dampwave(&["eigen-sweep"], a.path()).status.success());
    assert!(dampwave(&["eigen-sweep"], b.path()).status.success());
    for name in ["eigen_sweep.csv", "eigen_scaling.csv", "manifest.json", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn damping_wider_than_domain_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        a: 1.5,
        sigma: 0.6,
        ..RunConfig::default()
    };
    let path = write_config(dir.path(), &cfg);
    let out = dampwave(&["cap-solve", "--config", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a + sigma"), "{err}");
}

#[test]
fn dirichlet_half_integer_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        l: 1.5,
        ..RunConfig::default()
    };
    let path = write_config(dir.path(), &cfg);
    let out = dampwave(&["eigen-sweep", "--config", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Dirichlet"), "{err}");
}

#[test]
fn beta_override_selects_harmonic_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(&["neumann", "--beta-override", "2"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("ground level vs 1"));
}

#[test]
fn tolerance_file_controls_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let tol = dir.path().join("tol.toml");
    fs::write(&tol, "cap_airy_rel = 1e-20\n").unwrap();
    let out = dampwave(&["cap-solve", "--tolerance-file", tol.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL cap"));
}

#[test]
fn fit_reports_exponential_rate_of_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let mut text = String::from("t,energy\n");
    for k in 1..=400 {
        let t = 0.1 * k as f64;
        text.push_str(&format!("{t},{}\n", (-0.3 * t).exp()));
    }
    fs::write(&trace, text).unwrap();
    let out = dampwave(&["fit", trace.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert!((fit["exponential_rate"].as_f64().unwrap() - 0.3).abs() < 1e-9);
    assert_eq!(fit["inconclusive"], serde_json::Value::Bool(true));
}
