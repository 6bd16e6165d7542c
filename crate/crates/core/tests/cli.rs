//! End-to-end tests of the `pse` binary: exit codes, error wording, and the
//! files each subcommand leaves behind.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pse_core::axon::AxonParams;
use pse_core::config::Config;
use pse_core::grid::VisualFieldGrid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pse"))
}

/// A config with a small raster and sparse axon field so every subcommand
/// runs in well under a second.
fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = Config::default();
    cfg.grid = VisualFieldGrid::new(19, 25, 0.7).unwrap();
    cfg.axon = AxonParams { count: 80, ..Default::default() };
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in
        ["simulate", "gen-dataset", "train-approx", "train-encoder", "train-inverse", "eval", "report", "render", "verify"]
    {
        assert!(text.contains(cmd), "help is missing {cmd}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["--bogus-flag", "verify"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error"));
}

#[test]
fn unknown_subject_exits_nonzero_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--subject", "S-00000", "--out"])
        .arg(dir.path())
        .args(["gen-dataset", "--n", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("S-00000"), "{}", stderr(&out));
}

#[test]
fn zero_stimulus_renders_an_all_black_percept() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let stim_path = dir.path().join("zero.csv");
    fs::write(&stim_path, vec!["0.0"; 60].join(",") + "\n").unwrap();
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--subject", "S-12005", "--out"])
        .arg(dir.path())
        .arg("simulate")
        .arg("--stim")
        .arg(&stim_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let pgm = fs::read(dir.path().join("percept-S-12005.pgm")).unwrap();
    let text_prefix = String::from_utf8_lossy(&pgm[..15]);
    assert!(text_prefix.starts_with("P5\n"), "not a binary PGM: {text_prefix}");
    let payload = &pgm[pgm.len() - 19 * 25..];
    assert!(payload.iter().all(|&b| b == 0), "zero stimulus produced light");
}

#[test]
fn simulate_writes_one_frame_per_subject_with_light() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let stim_path = dir.path().join("one.csv");
    let mut amps = vec!["0.0".to_string(); 60];
    amps[27] = "8.0".to_string();
    fs::write(&stim_path, amps.join(",") + "\n").unwrap();
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--subject", "all", "--out"])
        .arg(dir.path())
        .arg("simulate")
        .arg("--stim")
        .arg(&stim_path)
        .args(["--normalization", "1.0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    for id in ["S-12005", "S-51009", "S-52001"] {
        let pgm = fs::read(dir.path().join(format!("percept-{id}.pgm"))).unwrap();
        let payload = &pgm[pgm.len() - 19 * 25..];
        assert!(payload.iter().any(|&b| b > 0), "{id} frame is black");
    }
}

#[test]
fn gen_dataset_rejects_a_sample_count_too_small_to_split() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--subject", "S-12005", "--out"])
        .arg(dir.path())
        .args(["gen-dataset", "--n", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn training_without_a_dataset_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--subject", "S-12005", "--out"])
        .arg(dir.path())
        .arg("train-approx")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("dataset-S-12005.bin"), "{err}");
}

#[test]
fn eval_without_checkpoints_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--subject", "S-12005", "--out"])
        .arg(dir.path())
        .arg("eval")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing file"), "{}", stderr(&out));
}

#[test]
fn report_requires_evaluation_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["--out"]).arg(dir.path()).arg("report").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("eval-records.json"), "{}", stderr(&out));
}

#[test]
fn render_rejects_zero_count_and_both_simulators() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out"])
        .arg(dir.path())
        .args(["render", "--count", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin()
        .args(["--out"])
        .arg(dir.path())
        .args(["render", "--simulator", "both"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("single simulator"), "{}", stderr(&out));
}

#[test]
fn config_with_unknown_keys_is_rejected_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"grdi": {"rows": 10}}"#).unwrap();
    let out = bin()
        .args(["--config"])
        .arg(&path)
        .args(["--out"])
        .arg(dir.path())
        .arg("verify")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grdi"), "{}", stderr(&out));
}

#[test]
fn unknown_profile_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--profile", "galaxy", "--out"])
        .arg(dir.path())
        .args(["gen-dataset", "--n", "10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("galaxy"), "{}", stderr(&out));
}

#[test]
fn small_scale_pipeline_runs_end_to_end_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = small_config(dir.path());

    // Desk profile on a small raster: exercises the plumbing end to end in
    // seconds, not model quality.
    let run = |args: &[&str]| {
        let mut c = bin();
        c.args(["--config"]).arg(&cfg_path);
        c.args(["--subject", "S-12005", "--profile", "desk", "--out"]).arg(dir.path());
        c.args(args);
        let out = c.output().unwrap();
        assert!(out.status.success(), "{:?} failed:\n{}", args, stderr(&out));
        out
    };

    run(&["gen-dataset", "--n", "120"]);
    run(&["train-approx"]);
    run(&["train-encoder"]);
    run(&["train-inverse"]);
    run(&["eval", "--simulator", "both"]);
    run(&["report"]);
    run(&["render", "--count", "2", "--simulator", "psi-hat"]);

    for f in [
        "dataset-S-12005.bin",
        "dataset-S-12005.json",
        "approximator-S-12005.ckpt",
        "approximator-S-12005.report.json",
        "encoder-S-12005.ckpt",
        "inverse-S-12005.ckpt",
        "eval-records.json",
        "report.csv",
        "report.txt",
        "run-manifest.json",
        "render-S-12005.pgm",
    ] {
        assert!(dir.path().join(f).is_file(), "missing output {f}");
    }
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4, "expected header + 2 models × 2 simulators");
}
