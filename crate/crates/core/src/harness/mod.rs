//! Experiment orchestration: config files, seeded multi-run execution,
//! metrics persistence, reporting, and the label-noise audit.
//!
//! An experiment is described by a flat key-value config file (see [`kv`]
//! for the grammar, [`ExperimentConfig`] for the schema). [`run_experiment`]
//! executes it once per seed, writing one subdirectory per seed:
//!
//! ```text
//! <output_dir>/
//!   config.kv            resolved config echo (all defaults expanded)
//!   report.kv            aggregated results
//!   seed_<s>/
//!     metrics.csv        one row per epoch
//!     model.ckpt         final checkpoint
//! ```
//!
//! Everything under `seed_<s>/` is a pure function of the config: rerunning
//! the same config produces byte-identical `metrics.csv` files. Aggregation
//! is recomputed *from the written CSVs* (not from in-memory values), so a
//! report can always be reproduced after the fact from the run directory
//! alone via [`RunReport::from_run_dir`].

mod audit;
mod config;
pub mod kv;
mod report;
mod run;

pub use audit::{noise_audit, NoiseAudit};
pub use config::{ArchPreset, DatasetSpec, ExperimentConfig, NoiseSpec, DATA_ROOT_ENV};
pub use report::{
    compare_runs, parse_metrics_csv, render_metrics_csv, RunComparison, RunReport, SeedOutcome,
};
pub use run::run_experiment;
