use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_improper-gp"))
}

#[test]
fn help_lists_experiments() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for e in [
        "synthetic1d",
        "synthetic2d",
        "forecast",
        "tabular",
        "validate",
        "fit",
        "IMPROPER_GP_WORKERS",
    ] {
        assert!(text.contains(e), "{e} missing from help");
    }
}

#[test]
fn validate_runs_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.json");
    std::fs::write(
        &cfg,
        r#"{"kernels": [{"family": "brownian"}], "dims": [2], "n_points": 20, "n_vectors": 100, "repeats": 1, "control": false}"#,
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--seed", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .env("IMPROPER_GP_WORKERS", "2")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed 4: violation = false"));
    assert!(dir.path().join("o/validation/brownian_seed4.csv").is_file());
}

#[test]
fn unknown_config_field_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"horizon": 10, "bogus": 1}"#).unwrap();
    let out = bin()
        .args(["forecast", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn fit_without_config_fails_cleanly() {
    let out = bin().arg("fit").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}
