//! Seeded experiment execution.
//!
//! One call to [`run_experiment`] trains the configured algorithm once per
//! seed and leaves a self-describing run directory behind (layout in the
//! [module docs](crate::harness)). Training state never spans seeds: each
//! seed gets its own noise realization, its own initialization, and its own
//! artifact subdirectory, so a crashed or interrupted run keeps every
//! fully-written epoch of every seed it reached.

use std::time::Instant;

use crate::checkpoint::{atomic_write, Checkpoint};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{render_metrics_csv, RunReport};
use crate::rng::{derive, domain};
use crate::trainers::Trainer;

/// Prefix string-carrying error variants with the seed they occurred under.
/// Variants that already carry their own coordinates (paths, offsets,
/// sample indices) pass through untouched.
fn tag_seed(e: Error, seed: u64) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("seed {seed}: {m}")),
        Error::Data(m) => Error::Data(format!("seed {seed}: {m}")),
        Error::Mask(m) => Error::Mask(format!("seed {seed}: {m}")),
        Error::NonFinite { context } => Error::NonFinite {
            context: format!("seed {seed}: {context}"),
        },
        Error::Shape { layer, detail } => Error::Shape {
            layer,
            detail: format!("seed {seed}: {detail}"),
        },
        other => other,
    }
}

/// Execute `cfg` for every seed, writing all artifacts under
/// `cfg.output_dir`, and aggregate the results.
///
/// The returned report is computed by re-reading the CSVs just written
/// (via [`RunReport::from_run_dir`]), so it is guaranteed to match any
/// later recomputation from the run directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;

    let train_clean = cfg.dataset.load_train()?;
    let test = cfg.dataset.load_test()?;
    if test.class_count() != train_clean.class_count()
        || test.feature_shape() != train_clean.feature_shape()
    {
        return Err(Error::Data(format!(
            "train split has {} classes of shape {:?}, test split {} of {:?}",
            train_clean.class_count(),
            train_clean.feature_shape(),
            test.class_count(),
            test.feature_shape(),
        )));
    }
    let base = cfg
        .arch
        .build(train_clean.feature_shape(), train_clean.class_count())?;
    let matrix = cfg.noise.matrix(train_clean.class_count())?;

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    atomic_write(
        &cfg.output_dir.join("config.kv"),
        cfg.to_kv().serialize().as_bytes(),
    )?;

    let mut widen = None;
    for &seed in &cfg.seeds {
        // Each seed derives its own injection stream from the configured
        // noise seed, so seeds see independent noise realizations of the
        // same transition matrix.
        let noise_stream = derive(cfg.noise.seed, &[domain::NOISE, seed]);
        let noisy = train_clean
            .with_noise(&matrix, noise_stream)
            .map_err(|e| tag_seed(e, seed))?;

        let mut trainer_cfg = cfg.trainer.clone();
        trainer_cfg.seed = seed;
        let mut trainer = Trainer::new(&base, trainer_cfg).map_err(|e| tag_seed(e, seed))?;
        if widen.is_none() {
            widen = trainer.widen_report().cloned();
        }

        let seed_dir = cfg.output_dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
        let csv_path = seed_dir.join("metrics.csv");
        let mut rows = Vec::with_capacity(cfg.trainer.max_epochs);
        while !trainer.is_finished() {
            let metrics = trainer
                .run_epoch(&noisy, &test)
                .map_err(|e| tag_seed(e, seed))?;
            rows.push(metrics);
            // Rewrite the full CSV after every epoch: an interrupted run
            // keeps every completed epoch, and the file is never observable
            // half-written.
            atomic_write(&csv_path, render_metrics_csv(&rows).as_bytes())?;
        }
        Checkpoint::from_trainer(&trainer)
            .save(seed_dir.join("model.ckpt"))
            .map_err(|e| tag_seed(e, seed))?;
    }

    let mut report = RunReport::from_run_dir(&cfg.output_dir)?;
    report.widen = widen;
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    atomic_write(
        &cfg.output_dir.join("report.kv"),
        report.to_kv().serialize().as_bytes(),
    )?;
    Ok(report)
}
