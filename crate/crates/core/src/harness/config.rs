//! Experiment configuration schema over the key-value format.
//!
//! Sections and keys (defaults in parentheses):
//!
//! ```text
//! dataset.kind        mnist | cifar10 | cifar100 | blobs
//! dataset.dir         directory with the dataset files   [file-backed kinds]
//! dataset.limit       cap on training samples            [optional]
//! dataset.test_limit  cap on test samples                [optional]
//! dataset.classes     class count                        [blobs]
//! dataset.per_class   training samples per class         [blobs]
//! dataset.test_per_class  test samples per class         [blobs] (= per_class)
//! dataset.dim         feature dimension                  [blobs]
//! dataset.separation  distance between blob centers      [blobs]
//! dataset.seed        blob sampling seed                 [blobs] (0)
//!
//! noise.kind          none | symmetric | pairflip        (none)
//! noise.rate          flip probability τ                 (0)
//! noise.seed          noise stream seed                  (0)
//!
//! arch.preset         mnist_mlp | cnn_small | cnn_large | blob_mlp
//! arch.hidden         comma list of hidden widths        [blob_mlp] (32)
//!
//! trainer.algorithm   baseline_ce | dropout_only | mentornet_ours |
//!                     coteaching | coteaching_plus | coteaching_plus_ours |
//!                     jocor | jocor_ours
//! trainer.batch_size       (128)      trainer.learning_rate  (0.001)
//! trainer.tau              (noise.rate)  — forget-rate target
//! trainer.ramp_epochs      (10)       trainer.max_epochs     (200)
//! trainer.warmup_epochs    (5)        trainer.dropout_p      (0.7)
//! trainer.jocor_weight     (0.85)
//! trainer.optim            adaptive | sgd  (adaptive)
//! trainer.momentum         (0.9)      [sgd only]
//! trainer.lr_decay_start   (80)       trainer.lr_decay_end   (200)
//!
//! run.seeds           comma list, nonempty, distinct
//! run.output_dir      run artifacts directory (created if absent)
//! ```
//!
//! Relative `dataset.dir` paths resolve against the `DROPSEL_DATA_ROOT`
//! environment variable when it is set; absolute paths are used as given.

use std::path::{Path, PathBuf};

use crate::data::{
    build_transition_matrix, load_cifar10, load_cifar100, load_mnist, synthetic_blobs, NoiseKind,
    NoisyDataset, TransitionMatrix,
};
use crate::error::{Error, Result};
use crate::harness::kv::KvMap;
use crate::net::{presets, NetworkSpec, OptimRule};
use crate::trainers::{Algorithm, TrainerConfig};

/// Environment variable naming the directory relative `dataset.dir` values
/// resolve against.
pub const DATA_ROOT_ENV: &str = "DROPSEL_DATA_ROOT";

/// Where an experiment's samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    Mnist {
        dir: PathBuf,
        limit: Option<usize>,
        test_limit: Option<usize>,
    },
    Cifar10 {
        dir: PathBuf,
        limit: Option<usize>,
        test_limit: Option<usize>,
    },
    Cifar100 {
        dir: PathBuf,
        limit: Option<usize>,
        test_limit: Option<usize>,
    },
    Blobs {
        class_count: usize,
        per_class: usize,
        test_per_class: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    },
}

fn resolve_data_dir(raw: &str, root: Option<&str>) -> PathBuf {
    let path = PathBuf::from(raw);
    match root {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path,
    }
}

/// MNIST's standard four-file layout inside `dir`.
const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

impl DatasetSpec {
    /// Parse the `dataset.*` section, consuming its keys.
    pub fn from_kv(kv: &mut KvMap) -> Result<DatasetSpec> {
        let kind = kv.take_required("dataset.kind")?;
        let spec = match kind.as_str() {
            "mnist" | "cifar10" | "cifar100" => {
                let raw_dir = kv.take_required("dataset.dir")?;
                let dir = resolve_data_dir(&raw_dir, std::env::var(DATA_ROOT_ENV).ok().as_deref());
                let limit = kv.take_parse_opt("dataset.limit")?;
                let test_limit = kv.take_parse_opt("dataset.test_limit")?;
                match kind.as_str() {
                    "mnist" => DatasetSpec::Mnist {
                        dir,
                        limit,
                        test_limit,
                    },
                    "cifar10" => DatasetSpec::Cifar10 {
                        dir,
                        limit,
                        test_limit,
                    },
                    _ => DatasetSpec::Cifar100 {
                        dir,
                        limit,
                        test_limit,
                    },
                }
            }
            "blobs" => {
                let per_class = kv.take_parse("dataset.per_class")?;
                DatasetSpec::Blobs {
                    class_count: kv.take_parse("dataset.classes")?,
                    per_class,
                    test_per_class: kv.take_parse_or("dataset.test_per_class", per_class)?,
                    dim: kv.take_parse("dataset.dim")?,
                    separation: kv.take_parse("dataset.separation")?,
                    seed: kv.take_parse_or("dataset.seed", 0u64)?,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown dataset.kind '{other}' (expected mnist|cifar10|cifar100|blobs)"
                )))
            }
        };
        Ok(spec)
    }

    pub fn to_kv(&self, kv: &mut KvMap) {
        kv.set("dataset.kind", self.kind_name());
        match self {
            DatasetSpec::Mnist {
                dir,
                limit,
                test_limit,
            }
            | DatasetSpec::Cifar10 {
                dir,
                limit,
                test_limit,
            }
            | DatasetSpec::Cifar100 {
                dir,
                limit,
                test_limit,
            } => {
                kv.set("dataset.dir", dir.display());
                if let Some(n) = limit {
                    kv.set("dataset.limit", n);
                }
                if let Some(n) = test_limit {
                    kv.set("dataset.test_limit", n);
                }
            }
            DatasetSpec::Blobs {
                class_count,
                per_class,
                test_per_class,
                dim,
                separation,
                seed,
            } => {
                kv.set("dataset.classes", class_count);
                kv.set("dataset.per_class", per_class);
                kv.set("dataset.test_per_class", test_per_class);
                kv.set("dataset.dim", dim);
                kv.set("dataset.separation", separation);
                kv.set("dataset.seed", seed);
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DatasetSpec::Mnist { .. } => "mnist",
            DatasetSpec::Cifar10 { .. } => "cifar10",
            DatasetSpec::Cifar100 { .. } => "cifar100",
            DatasetSpec::Blobs { .. } => "blobs",
        }
    }

    /// The training files this spec will read: both splits for file-backed
    /// datasets, nothing for synthetic blobs.
    fn required_files(&self) -> Vec<PathBuf> {
        match self {
            DatasetSpec::Mnist { dir, .. } => {
                MNIST_FILES.iter().map(|f| dir.join(f)).collect()
            }
            DatasetSpec::Cifar10 { dir, .. } => {
                // At least one train batch must exist; that is checked in
                // `train_batches`. The test batch is unconditional.
                vec![dir.join("test_batch.bin")]
            }
            DatasetSpec::Cifar100 { dir, .. } => {
                vec![dir.join("train.bin"), dir.join("test.bin")]
            }
            DatasetSpec::Blobs { .. } => Vec::new(),
        }
    }

    fn train_batches(dir: &Path) -> Result<Vec<PathBuf>> {
        let found: Vec<PathBuf> = (1..=5)
            .map(|i| dir.join(format!("data_batch_{i}.bin")))
            .filter(|p| p.exists())
            .collect();
        if found.is_empty() {
            return Err(Error::Config(format!(
                "no data_batch_*.bin files in {}",
                dir.display()
            )));
        }
        Ok(found)
    }

    /// Check every referenced path exists (called at config-validation time
    /// so a 200-epoch run cannot die on a typo'd path after an hour).
    pub fn validate_paths(&self) -> Result<()> {
        for path in self.required_files() {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "dataset file {} does not exist",
                    path.display()
                )));
            }
        }
        if let DatasetSpec::Cifar10 { dir, .. } = self {
            Self::train_batches(dir)?;
        }
        if let DatasetSpec::Blobs {
            class_count, dim, ..
        } = *self
        {
            if class_count < 2 || dim < class_count {
                return Err(Error::Config(format!(
                    "blobs need dim ≥ classes ≥ 2, got dim={dim}, classes={class_count}"
                )));
            }
        }
        Ok(())
    }

    /// Load the clean training split.
    pub fn load_train(&self) -> Result<NoisyDataset> {
        match self {
            DatasetSpec::Mnist { dir, limit, .. } => load_mnist(
                dir.join(MNIST_FILES[0]),
                dir.join(MNIST_FILES[1]),
                *limit,
            ),
            DatasetSpec::Cifar10 { dir, limit, .. } => {
                load_cifar10(&Self::train_batches(dir)?, *limit)
            }
            DatasetSpec::Cifar100 { dir, limit, .. } => {
                load_cifar100(&[dir.join("train.bin")], *limit)
            }
            DatasetSpec::Blobs {
                class_count,
                per_class,
                dim,
                separation,
                seed,
                ..
            } => synthetic_blobs(*class_count, *per_class, *dim, *separation, *seed, false),
        }
    }

    /// Load the clean test split.
    pub fn load_test(&self) -> Result<NoisyDataset> {
        match self {
            DatasetSpec::Mnist {
                dir, test_limit, ..
            } => load_mnist(
                dir.join(MNIST_FILES[2]),
                dir.join(MNIST_FILES[3]),
                *test_limit,
            ),
            DatasetSpec::Cifar10 {
                dir, test_limit, ..
            } => load_cifar10(&[dir.join("test_batch.bin")], *test_limit),
            DatasetSpec::Cifar100 {
                dir, test_limit, ..
            } => load_cifar100(&[dir.join("test.bin")], *test_limit),
            DatasetSpec::Blobs {
                class_count,
                test_per_class,
                dim,
                separation,
                seed,
                ..
            } => synthetic_blobs(
                *class_count,
                *test_per_class,
                *dim,
                *separation,
                *seed,
                true,
            ),
        }
    }
}

/// Label-noise settings.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    /// Base seed of the noise stream; each run seed derives its own
    /// injection stream from it, so different seeds see different noise
    /// realizations of the same matrix.
    pub seed: u64,
}

impl NoiseSpec {
    pub fn from_kv(kv: &mut KvMap) -> Result<NoiseSpec> {
        let kind = match kv.take("noise.kind") {
            Some(s) => NoiseKind::parse(&s)?,
            None => NoiseKind::None,
        };
        let spec = NoiseSpec {
            kind,
            rate: kv.take_parse_or("noise.rate", 0.0)?,
            seed: kv.take_parse_or("noise.seed", 0u64)?,
        };
        if spec.kind == NoiseKind::None && spec.rate != 0.0 {
            return Err(Error::Config(format!(
                "noise.kind = none but noise.rate = {}",
                spec.rate
            )));
        }
        Ok(spec)
    }

    pub fn to_kv(&self, kv: &mut KvMap) {
        kv.set("noise.kind", self.kind.name());
        kv.set("noise.rate", self.rate);
        kv.set("noise.seed", self.seed);
    }

    pub fn matrix(&self, class_count: usize) -> Result<TransitionMatrix> {
        build_transition_matrix(self.kind, self.rate, class_count)
    }
}

/// Which base architecture to train.
#[derive(Debug, Clone, PartialEq)]
pub enum ArchPreset {
    MnistMlp,
    CnnSmall,
    CnnLarge,
    BlobMlp { hidden: Vec<usize> },
}

impl ArchPreset {
    pub fn from_kv(kv: &mut KvMap) -> Result<ArchPreset> {
        match kv.take_required("arch.preset")?.as_str() {
            "mnist_mlp" => Ok(ArchPreset::MnistMlp),
            "cnn_small" => Ok(ArchPreset::CnnSmall),
            "cnn_large" => Ok(ArchPreset::CnnLarge),
            "blob_mlp" => Ok(ArchPreset::BlobMlp {
                hidden: kv.take_list_or("arch.hidden", vec![32])?,
            }),
            other => Err(Error::Config(format!(
                "unknown arch.preset '{other}' (expected mnist_mlp|cnn_small|cnn_large|blob_mlp)"
            ))),
        }
    }

    pub fn to_kv(&self, kv: &mut KvMap) {
        kv.set("arch.preset", self.name());
        if let ArchPreset::BlobMlp { hidden } = self {
            let list: Vec<String> = hidden.iter().map(|w| w.to_string()).collect();
            kv.set("arch.hidden", list.join(","));
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ArchPreset::MnistMlp => "mnist_mlp",
            ArchPreset::CnnSmall => "cnn_small",
            ArchPreset::CnnLarge => "cnn_large",
            ArchPreset::BlobMlp { .. } => "blob_mlp",
        }
    }

    /// Instantiate the base network for a dataset's sample shape and class
    /// count, rejecting incompatible pairings up front.
    pub fn build(&self, feature_shape: &[usize], class_count: usize) -> Result<NetworkSpec> {
        let spec = match self {
            ArchPreset::MnistMlp => {
                if feature_shape != [1, 28, 28] || class_count != 10 {
                    return Err(self.mismatch(feature_shape, class_count));
                }
                presets::mnist_mlp()
            }
            ArchPreset::CnnSmall => {
                if feature_shape != [3, 32, 32] {
                    return Err(self.mismatch(feature_shape, class_count));
                }
                presets::cnn_small(class_count)?
            }
            ArchPreset::CnnLarge => {
                if feature_shape != [3, 32, 32] {
                    return Err(self.mismatch(feature_shape, class_count));
                }
                presets::cnn_large(class_count)?
            }
            ArchPreset::BlobMlp { hidden } => {
                if feature_shape.len() != 1 {
                    return Err(self.mismatch(feature_shape, class_count));
                }
                presets::blob_mlp(feature_shape[0], class_count, hidden)?
            }
        };
        Ok(spec)
    }

    fn mismatch(&self, feature_shape: &[usize], class_count: usize) -> Error {
        Error::Config(format!(
            "arch.preset {} cannot train samples of shape {feature_shape:?} with {class_count} classes",
            self.name()
        ))
    }
}

/// A complete experiment: dataset, noise, architecture, trainer settings,
/// seeds, and output location.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub noise: NoiseSpec,
    pub arch: ArchPreset,
    /// Trainer settings template; its `seed` field is overwritten per run
    /// seed and carries no meaning here.
    pub trainer: TrainerConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Parse and validate a whole config, consuming the map. Unrecognized
    /// keys and missing dataset files are errors.
    pub fn from_kv(mut kv: KvMap) -> Result<ExperimentConfig> {
        let dataset = DatasetSpec::from_kv(&mut kv)?;
        let noise = NoiseSpec::from_kv(&mut kv)?;
        let arch = ArchPreset::from_kv(&mut kv)?;

        let algorithm = Algorithm::parse(&kv.take_required("trainer.algorithm")?)?;
        let mut trainer = TrainerConfig::new(algorithm, 0);
        trainer.batch_size = kv.take_parse_or("trainer.batch_size", trainer.batch_size)?;
        trainer.learning_rate =
            kv.take_parse_or("trainer.learning_rate", trainer.learning_rate)?;
        trainer.tau = kv.take_parse_or("trainer.tau", noise.rate)?;
        trainer.ramp_epochs = kv.take_parse_or("trainer.ramp_epochs", trainer.ramp_epochs)?;
        trainer.max_epochs = kv.take_parse_or("trainer.max_epochs", trainer.max_epochs)?;
        trainer.warmup_epochs =
            kv.take_parse_or("trainer.warmup_epochs", trainer.warmup_epochs)?;
        trainer.dropout_p = kv.take_parse_or("trainer.dropout_p", trainer.dropout_p)?;
        trainer.jocor_weight =
            kv.take_parse_or("trainer.jocor_weight", trainer.jocor_weight)?;
        trainer.lr_decay_start =
            kv.take_parse_or("trainer.lr_decay_start", trainer.lr_decay_start)?;
        trainer.lr_decay_end =
            kv.take_parse_or("trainer.lr_decay_end", trainer.lr_decay_end)?;
        trainer.optim = match kv.take("trainer.optim").as_deref() {
            None | Some("adaptive") => OptimRule::default_adaptive(),
            Some("sgd") => OptimRule::SgdMomentum {
                momentum: kv.take_parse_or("trainer.momentum", 0.9)?,
            },
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown trainer.optim '{other}' (expected adaptive|sgd)"
                )))
            }
        };

        let seeds: Vec<u64> = kv.take_list("run.seeds")?;
        let output_dir = PathBuf::from(kv.take_required("run.output_dir")?);
        kv.expect_consumed("experiment config")?;

        let cfg = ExperimentConfig {
            dataset,
            noise,
            arch,
            trainer,
            seeds,
            output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_kv(KvMap::parse(text)?)
    }

    /// Load from a file, applying `key=value` override strings on top.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<ExperimentConfig> {
        let mut kv = KvMap::parse_file(path)?;
        for spec in overrides {
            kv.apply_override(spec)?;
        }
        ExperimentConfig::from_kv(kv)
    }

    /// Serialize the fully-resolved config (defaults expanded). Parsing the
    /// result reproduces this config exactly.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        self.dataset.to_kv(&mut kv);
        self.noise.to_kv(&mut kv);
        self.arch.to_kv(&mut kv);

        let t = &self.trainer;
        kv.set("trainer.algorithm", t.algorithm.name());
        kv.set("trainer.batch_size", t.batch_size);
        kv.set("trainer.learning_rate", t.learning_rate);
        kv.set("trainer.tau", t.tau);
        kv.set("trainer.ramp_epochs", t.ramp_epochs);
        kv.set("trainer.max_epochs", t.max_epochs);
        kv.set("trainer.warmup_epochs", t.warmup_epochs);
        kv.set("trainer.dropout_p", t.dropout_p);
        kv.set("trainer.jocor_weight", t.jocor_weight);
        kv.set("trainer.lr_decay_start", t.lr_decay_start);
        kv.set("trainer.lr_decay_end", t.lr_decay_end);
        match t.optim {
            OptimRule::AdaptiveMoments { .. } => kv.set("trainer.optim", "adaptive"),
            OptimRule::SgdMomentum { momentum } => {
                kv.set("trainer.optim", "sgd");
                kv.set("trainer.momentum", momentum);
            }
        }

        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        kv.set("run.seeds", seeds.join(","));
        kv.set("run.output_dir", self.output_dir.display());
        kv
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("run.seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config(format!(
                "run.seeds must be distinct, got {:?}",
                self.seeds
            )));
        }
        self.dataset.validate_paths()?;
        if self.noise.kind != NoiseKind::None {
            // Class count is dataset-dependent; validate the rate range here
            // with the smallest legal class count.
            build_transition_matrix(self.noise.kind, self.noise.rate, 2)?;
        }
        let mut probe = self.trainer.clone();
        probe.seed = self.seeds[0];
        probe.validate()?;
        Ok(())
    }
}
