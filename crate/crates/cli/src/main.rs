//! `dropsel` — command-line driver for noisy-label training experiments.
//!
//! ```text
//! dropsel train <config> [--set key=value ...]
//! dropsel evaluate <checkpoint> <dataset-config> [--set key=value ...]
//! dropsel noise-audit <config> [--set key=value ...]
//! dropsel report <run-dir>...
//! dropsel compare <run-dir-a> <run-dir-b>
//! ```
//!
//! Every failure prints one machine-readable line to stderr —
//! `error: class=<class>: <message>` — and exits nonzero with a
//! class-specific code: usage 2 (from argument parsing), config 3, data 4,
//! io 5, numeric 6, and 7 for a failed noise audit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dropsel_core::checkpoint::Checkpoint;
use dropsel_core::harness::kv::KvMap;
use dropsel_core::harness::{
    compare_runs, noise_audit, run_experiment, DatasetSpec, ExperimentConfig, RunReport,
};
use dropsel_core::rng::{derive, domain};
use dropsel_core::trainers::evaluate;
use dropsel_core::Result;

#[derive(Parser)]
#[command(
    name = "dropsel",
    version,
    about = "Train and evaluate noisy-label algorithms built on dropout-instance sample selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config's experiment across all of its seeds
    Train {
        /// Experiment config file (key-value format)
        config: PathBuf,
        /// Override a config key, e.g. --set trainer.max_epochs=2 (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Report a saved model's accuracy on a dataset's test split
    Evaluate {
        /// Checkpoint file written by `train`
        checkpoint: PathBuf,
        /// Config file whose dataset.* section names the data
        dataset: PathBuf,
        /// Override a config key (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a config's injected label noise against its transition matrix
    NoiseAudit {
        /// Experiment config file
        config: PathBuf,
        /// Override a config key (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Summarize one or more finished run directories
    Report {
        /// Run directories written by `train`
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
    },
    /// Compare the headline metrics of two runs of the same task
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
    },
}

fn exit_code_for(class: &str) -> u8 {
    match class {
        "config" => 3,
        "data" => 4,
        "io" => 5,
        "numeric" => 6,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: class={}: {e}", e.class());
            ExitCode::from(exit_code_for(e.class()))
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            println!(
                "training {} on {} ({} seed{}, {} epochs) → {}",
                cfg.trainer.algorithm,
                cfg.dataset.kind_name(),
                cfg.seeds.len(),
                if cfg.seeds.len() == 1 { "" } else { "s" },
                cfg.trainer.max_epochs,
                cfg.output_dir.display()
            );
            let report = run_experiment(&cfg)?;
            print!("{}", report.render_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            checkpoint,
            dataset,
            set,
        } => {
            let mut kv = KvMap::parse_file(&dataset)?;
            for spec in &set {
                kv.apply_override(spec)?;
            }
            // Only the dataset section matters here; a full training config
            // is accepted and its other sections ignored.
            let dataset_spec = DatasetSpec::from_kv(&mut kv)?;
            dataset_spec.validate_paths()?;
            let test = dataset_spec.load_test()?;
            let ckpt = Checkpoint::load(&checkpoint)?;
            let acc = evaluate(&ckpt.spec, &ckpt.models[0].params, &test)?;
            println!(
                "test accuracy: {acc:.4} ({} samples, {} model{})",
                test.len(),
                ckpt.models.len(),
                if ckpt.models.len() == 1 { "" } else { "s; first evaluated" },
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::NoiseAudit { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let train = cfg.dataset.load_train()?;
            let matrix = cfg.noise.matrix(train.class_count())?;
            // Audit the exact realization the first seed will train on.
            let stream = derive(cfg.noise.seed, &[domain::NOISE, cfg.seeds[0]]);
            let noisy = train.with_noise(&matrix, stream)?;
            let audit = noise_audit(&noisy, &matrix)?;
            println!("{audit}");
            if audit.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "error: class=audit: realized noise deviates from the configured matrix \
                     (worst cell {:?}, |dev| {:.4})",
                    audit.worst_cell, audit.max_abs_deviation
                );
                Ok(ExitCode::from(7))
            }
        }
        Command::Report { run_dirs } => {
            for dir in &run_dirs {
                let report = RunReport::from_run_dir(dir)?;
                println!("{}:", dir.display());
                print!("{}", report.render_text());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { run_a, run_b } => {
            let a = RunReport::from_run_dir(&run_a)?;
            let b = RunReport::from_run_dir(&run_b)?;
            let cmp = compare_runs(&a, &b)?;
            println!("first:  {}", run_a.display());
            println!("second: {}", run_b.display());
            println!("{cmp}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
