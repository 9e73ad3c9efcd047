//! End-to-end checks of the `bgvcf` binary: exit codes, output locations and
//! configuration precedence.

use std::path::Path;
use std::process::{Command, Output};

use bgvcf_stap::pipeline::{RunManifest, RunStatus, MANIFEST_FILE};

fn bgvcf(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bgvcf"));
    cmd.args(args)
        .env_remove("BGVCF_OUTPUT_DIR")
        .env("RUST_LOG", "error");
    cmd
}

fn status(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn manifest(dir: &Path) -> RunManifest {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SMALL: &[&str] = &[
    "--cut",
    "50",
    "--training",
    "8",
    "--estimators",
    "bgvcf,lsmi",
];

#[test]
fn screen_succeeds_and_lists_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec!["screen", "--output-dir", out_dir.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let out = bgvcf(&args).output().unwrap();
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let m = manifest(&out_dir);
    assert_eq!(m.status, RunStatus::Complete);
    for file in &m.outputs {
        assert!(
            out_dir.join(&file.path).is_file(),
            "{} missing",
            file.path.display()
        );
    }
    let listed: Vec<_> = m.outputs.iter().map(|f| f.path.clone()).collect();
    for entry in std::fs::read_dir(&out_dir).unwrap() {
        let name = entry.unwrap().file_name();
        assert!(
            listed.iter().any(|p| p.as_os_str() == name),
            "{name:?} not in manifest"
        );
    }
    let screening = std::fs::read_to_string(out_dir.join("screening.csv")).unwrap();
    assert_eq!(screening.lines().count(), 1 + 8);
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let mut args = vec!["screen"];
    args.extend_from_slice(SMALL);
    let out = bgvcf(&args)
        .env("BGVCF_OUTPUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join(MANIFEST_FILE).is_file());
    assert!(!dir.path().join("bgvcf-out").exists());
}

#[test]
fn flag_beats_environment_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.toml");
    std::fs::write(
        &config,
        format!(
            "output_dir = {:?}\nestimators = [\"lsmi\"]\n[window]\nnum_training = 6\ncut = 40\n",
            dir.path().join("from-file")
        ),
    )
    .unwrap();
    let flag_dir = dir.path().join("from-flag");
    let out = bgvcf(&[
        "screen",
        "-c",
        config.to_str().unwrap(),
        "--output-dir",
        flag_dir.to_str().unwrap(),
    ])
    .env("BGVCF_OUTPUT_DIR", dir.path().join("from-env"))
    .output()
    .unwrap();
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(flag_dir.join(MANIFEST_FILE).is_file());
    assert!(!dir.path().join("from-file").exists());
    assert!(!dir.path().join("from-env").exists());
    // Window settings still come from the file.
    let screening = std::fs::read_to_string(flag_dir.join("screening.csv")).unwrap();
    assert_eq!(screening.lines().count(), 1 + 6);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bgvcf(&[
        "run",
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--estimators",
        "mvdr",
    ])
    .output()
    .unwrap();
    assert_eq!(status(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mvdr"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[window]\nnum_training = 0\n").unwrap();
    let out = bgvcf(&[
        "run",
        "-c",
        bad.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ])
    .output()
    .unwrap();
    assert_eq!(status(&out), 2);

    let out = bgvcf(&[
        "screen",
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--cut",
        "5000",
    ])
    .output()
    .unwrap();
    assert_eq!(status(&out), 2);
}

#[test]
fn numerical_failure_exits_with_3_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    // Finite samples whose power overflows to infinity.
    let cube = dir.path().join("huge.bin");
    let mut bytes = Vec::new();
    for i in 0..(120 * 60) {
        let v = if i % 2 == 0 { 1e200 } else { -3e200 };
        bytes.extend_from_slice(&f64::to_le_bytes(v));
        bytes.extend_from_slice(&f64::to_le_bytes(v * 0.5));
    }
    std::fs::write(&cube, bytes).unwrap();
    let out_dir = dir.path().join("out");
    let out = bgvcf(&[
        "run",
        "--input",
        cube.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--cut",
        "30",
    ])
    .output()
    .unwrap();
    assert_eq!(status(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&out_dir);
    assert_eq!(m.status, RunStatus::Failed);
    let error = m.error.unwrap();
    assert!(
        error.contains("thpd") && error.contains("non-finite"),
        "{error}"
    );
}

#[test]
fn simulate_then_convert_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("cube.bin");
    let csv = dir.path().join("cube.csv");
    let back = dir.path().join("back.bin");
    let out = bgvcf(&["simulate", "--seed", "7", "--data", bin.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for (from, to) in [(&bin, &csv), (&csv, &back)] {
        let out = bgvcf(&[
            "convert",
            from.to_str().unwrap(),
            to.to_str().unwrap(),
            "--elements",
            "10",
            "--pulses",
            "12",
        ])
        .output()
        .unwrap();
        assert_eq!(status(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&bin).unwrap(), std::fs::read(&back).unwrap());
}
