//! Exercises the installed binary: commands, flags, and the exit-code
//! contract (0 ok, 2 config error, 3 missing input, 4 incompatible
//! artifact).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn introd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_introd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_tiny_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        r#"
output_dir = "out"
seeds = [0]

[bias]
n_train = 300
n_id_test = 100
n_ood_test = 100

[teacher]
hidden = 16

[sgd_teacher]
epochs = 2

[sgd_student]
epochs = 2
"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn gen_writes_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = introd(&["gen", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = dir.path().join("out/data");
    let first = fs::read(data.join("answer_prior_0_train.ds")).unwrap();
    let out = introd(&["gen", "--config", &cfg], dir.path());
    assert!(out.status.success());
    let second = fs::read(data.join("answer_prior_0_train.ds")).unwrap();
    assert_eq!(first, second);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("500 samples"), "stdout: {stdout}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[bias]\nbeta = 0.01\n").unwrap();
    let out = introd(&["gen", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let path = dir.path().join("unknown.toml");
    fs::write(&path, "not_a_key = 1\n").unwrap();
    let out = introd(&["gen", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = introd(&["ablate", "--suite", "q9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    // No datasets generated yet.
    let out = introd(&["train-teacher", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3));
    // Missing config file is also a missing input.
    let out = introd(&["gen", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn incompatible_checkpoint_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    assert!(introd(&["gen", "--config", &cfg], dir.path()).status.success());
    assert!(introd(&["train-teacher", "--config", &cfg], dir.path())
        .status
        .success());
    let ck = dir.path().join("out/teacher_0.ck");
    let mut bytes = fs::read(&ck).unwrap();
    bytes[4] = 99;
    fs::write(&ck, bytes).unwrap();
    let out = introd(&["distill", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn full_pipeline_via_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    for args in [
        vec!["gen", "--config", cfg.as_str()],
        vec!["train-teacher", "--config", cfg.as_str()],
        vec!["distill", "--config", cfg.as_str()],
        vec!["hist", "--config", cfg.as_str()],
        vec!["ablate", "--config", cfg.as_str(), "--suite", "q3"],
    ] {
        let out = introd(&args, dir.path());
        assert!(
            out.status.success(),
            "{:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for artifact in [
        "out/teacher_0.ck",
        "out/student_0.ck",
        "out/teacher_metrics.csv",
        "out/student_metrics_0.json",
        "out/hist_0.csv",
        "out/ablate_q3.json",
        "out/ablate_q3.csv",
    ] {
        assert!(dir.path().join(artifact).exists(), "{artifact} missing");
    }
}

#[test]
fn run_command_emits_manifest_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = introd(&["run", "--config", &cfg, "--seed", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seeds"][0]["seed"], 5);
    assert!(dir.path().join("out/data/answer_prior_5_train.ds").exists());
}

#[test]
fn out_flag_and_preset_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = introd(
        &[
            "gen",
            "--preset",
            "position",
            "--seed",
            "1",
            "--out",
            "elsewhere",
            "--split",
            "train",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir
        .path()
        .join("elsewhere/data/position_1_train.ds")
        .exists());
}
