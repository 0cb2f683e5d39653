//! End-to-end tests of the `dropsel` binary: artifact layout, determinism
//! through the CLI, config overrides, the report/compare/evaluate round
//! trip, and the exit-code contract for each error class.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dropsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dropsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A complete config for a seconds-scale blob experiment.
fn blob_config(out_dir: &Path) -> String {
    format!(
        "dataset.kind = blobs\n\
         dataset.classes = 3\n\
         dataset.per_class = 12\n\
         dataset.test_per_class = 6\n\
         dataset.dim = 6\n\
         dataset.separation = 3.0\n\
         dataset.seed = 2\n\
         noise.kind = symmetric\n\
         noise.rate = 0.2\n\
         noise.seed = 9\n\
         arch.preset = blob_mlp\n\
         arch.hidden = 8\n\
         trainer.algorithm = mentornet_ours\n\
         trainer.dropout_p = 0.3\n\
         trainer.batch_size = 12\n\
         trainer.max_epochs = 3\n\
         trainer.ramp_epochs = 2\n\
         trainer.warmup_epochs = 1\n\
         run.seeds = 1,2\n\
         run.output_dir = {}\n",
        out_dir.display()
    )
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.kv");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn train_writes_the_full_run_layout() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &blob_config(&run_dir));

    let out = dropsel(&["train", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("mean last-10 test accuracy"), "{text}");

    for p in [
        "config.kv",
        "report.kv",
        "seed_1/metrics.csv",
        "seed_1/model.ckpt",
        "seed_2/metrics.csv",
        "seed_2/model.ckpt",
    ] {
        assert!(run_dir.join(p).is_file(), "missing artifact {p}");
    }
    let csv = fs::read_to_string(run_dir.join("seed_1/metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,train_loss,test_acc,selected_fraction,label_precision\n"));
    assert_eq!(csv.lines().count(), 1 + 3, "header plus one row per epoch");
}

#[test]
fn rerunning_a_config_reproduces_the_metrics_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let cfg = write_config(tmp.path(), &blob_config(&run_a));

    assert!(dropsel(&["train", cfg.to_str().unwrap()]).status.success());
    let over = format!("run.output_dir={}", run_b.display());
    assert!(dropsel(&["train", cfg.to_str().unwrap(), "--set", &over])
        .status
        .success());

    for seed in [1, 2] {
        let a = fs::read(run_a.join(format!("seed_{seed}/metrics.csv"))).unwrap();
        let b = fs::read(run_b.join(format!("seed_{seed}/metrics.csv"))).unwrap();
        assert_eq!(a, b, "seed {seed} metrics differ between identical runs");
    }
}

#[test]
fn set_overrides_reach_the_experiment() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &blob_config(&run_dir));

    let out = dropsel(&[
        "train",
        cfg.to_str().unwrap(),
        "--set",
        "trainer.max_epochs=5",
        "--set",
        "run.seeds=7",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(run_dir.join("seed_7/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5, "override must extend the run");
    assert!(!run_dir.join("seed_1").exists(), "seed list was overridden");
    // The echoed config records the override, not the file's value.
    let echoed = fs::read_to_string(run_dir.join("config.kv")).unwrap();
    assert!(echoed.contains("trainer.max_epochs = 5"), "{echoed}");
}

#[test]
fn report_compare_and_evaluate_round_trip() {
    let tmp = TempDir::new().unwrap();
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let cfg = write_config(tmp.path(), &blob_config(&run_a));
    assert!(dropsel(&["train", cfg.to_str().unwrap()]).status.success());
    let over = format!("run.output_dir={}", run_b.display());
    assert!(dropsel(&[
        "train",
        cfg.to_str().unwrap(),
        "--set",
        &over,
        "--set",
        "trainer.algorithm=baseline_ce",
    ])
    .status
    .success());

    let report = dropsel(&["report", run_a.to_str().unwrap()]);
    assert!(report.status.success());
    assert!(stdout(&report).contains("mean last-10 test accuracy"));

    let cmp = dropsel(&["compare", run_a.to_str().unwrap(), run_b.to_str().unwrap()]);
    assert!(cmp.status.success(), "stderr: {}", stderr(&cmp));
    assert!(stdout(&cmp).contains("points"), "{}", stdout(&cmp));

    let eval = dropsel(&[
        "evaluate",
        run_a.join("seed_1/model.ckpt").to_str().unwrap(),
        cfg.to_str().unwrap(),
    ]);
    assert!(eval.status.success(), "stderr: {}", stderr(&eval));
    assert!(stdout(&eval).contains("test accuracy"), "{}", stdout(&eval));
}

#[test]
fn compare_rejects_runs_of_different_tasks() {
    let tmp = TempDir::new().unwrap();
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let cfg = write_config(tmp.path(), &blob_config(&run_a));
    assert!(dropsel(&["train", cfg.to_str().unwrap()]).status.success());
    let over = format!("run.output_dir={}", run_b.display());
    assert!(dropsel(&[
        "train",
        cfg.to_str().unwrap(),
        "--set",
        &over,
        "--set",
        "noise.rate=0.3",
    ])
    .status
    .success());

    let cmp = dropsel(&["compare", run_a.to_str().unwrap(), run_b.to_str().unwrap()]);
    assert_eq!(cmp.status.code(), Some(3), "stderr: {}", stderr(&cmp));
    let err = stderr(&cmp);
    assert!(err.contains("class=config"), "{err}");
    assert!(err.contains("noise.rate"), "must name the differing key: {err}");
}

#[test]
fn noise_audit_passes_for_an_honest_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &blob_config(&tmp.path().join("run")));
    let out = dropsel(&["noise-audit", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("PASS"), "{}", stdout(&out));
}

#[test]
fn noise_audit_flags_a_three_sigma_fluke_with_exit_seven() {
    // 45 samples at τ=0.45 leave per-cell counts small enough that some
    // noise streams land a cell outside 3σ of the configured matrix; this
    // particular seed is one frozen instance of that fluke.
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");
    let mut body = blob_config(&run_dir);
    body = body.replace("dataset.per_class = 12", "dataset.per_class = 15");
    body = body.replace("noise.rate = 0.2", "noise.rate = 0.45");
    body = body.replace("trainer.ramp_epochs = 2", "trainer.ramp_epochs = 1");
    body = body.replace("run.seeds = 1,2", "run.seeds = 1");
    let cfg = write_config(tmp.path(), &body);

    let out = dropsel(&["noise-audit", cfg.to_str().unwrap(), "--set", "noise.seed=5"]);
    assert_eq!(out.status.code(), Some(7), "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"), "{}", stdout(&out));
    assert!(stderr(&out).contains("class=audit"), "{}", stderr(&out));
}

#[test]
fn error_classes_map_to_distinct_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let run_dir = tmp.path().join("run");

    // Missing config file → io (5).
    let out = dropsel(&["train", tmp.path().join("absent.kv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("class=io"), "{}", stderr(&out));

    // Unknown config key → config (3).
    let cfg = write_config(tmp.path(), &blob_config(&run_dir));
    let out = dropsel(&["train", cfg.to_str().unwrap(), "--set", "trainer.typo=1"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("class=config"), "{}", stderr(&out));

    // Corrupt checkpoint → data (4).
    let bogus = tmp.path().join("model.ckpt");
    fs::write(&bogus, b"not a checkpoint at all").unwrap();
    let out = dropsel(&["evaluate", bogus.to_str().unwrap(), cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("class=data"), "{}", stderr(&out));

    // Clap usage errors keep clap's conventional exit code 2.
    let out = dropsel(&["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(2));
}
