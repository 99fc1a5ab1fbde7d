use std::fs;
use std::process::Command;

use bodycal::harness::ExperimentConfig;

fn bodycal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bodycal"))
}

#[test]
fn default_config_round_trips() {
    let out = bodycal().arg("default-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), ExperimentConfig::default());
}

#[test]
fn run_applies_overrides_and_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    fs::write(
        &cfg_path,
        "[experiment]\niterations = 3\neval_configs = 20\n[selection]\nbudget = 30\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bodycal()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .args(["--reps", "2", "--seed", "5", "--methods", "r,ccsal", "--noise", "cn"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("R-CN") && stdout.contains("CCSAL-CN"));

    assert!(out_dir.join("metrics_R-CN.csv").is_file());
    assert!(out_dir.join("metrics_CCSAL-CN.csv").is_file());
    assert!(!out_dir.join("metrics_AL-CN.csv").exists());
    let manifest = ExperimentConfig::load(&out_dir.join("manifest.toml")).unwrap();
    assert_eq!(manifest.experiment.repetitions, 2);
    assert_eq!(manifest.experiment.master_seed, 5);
    assert_eq!(manifest.experiment.iterations, 3);
    let rows = fs::read_to_string(out_dir.join("metrics_R-CN.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 3);
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[experiment]\nrepetitions = 0\n").unwrap();
    let out = bodycal().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("repetitions"));

    let out = bodycal()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert!(!out.status.success());

    let out = bodycal().args(["run", "--methods", "al,xyz"]).output().unwrap();
    assert!(!out.status.success());
}
