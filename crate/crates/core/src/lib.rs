//! Training deep networks on noisily-labelled data with small-loss sample
//! selection, where the usual pair of peer networks is replaced by a single
//! widened network and dropout resampling.
//!
//! The crate is organised in layers:
//!
//! * [`tensor`], [`rng`], [`error`] — shared plumbing: a dense row-major
//!   `f64` tensor, a counter-based deterministic RNG, and the crate error
//!   type.
//! * [`net`] — network descriptions, parameter storage, forward/backward
//!   passes, losses, and optimizers.
//! * [`ensemble`] — the dropout-instance machinery: architecture widening,
//!   dropout insertion, and per-iteration mask sampling.
//! * [`data`] — dataset loading (MNIST/CIFAR binary formats, synthetic
//!   Gaussian blobs), label-noise injection, and mini-batch iteration.
//! * [`selection`] — the forget-rate schedule, small-loss selection, and the
//!   disagreement filter.
//! * [`trainers`] — per-epoch training loops for the baseline, single-network
//!   dropout variants, and the two-network reference algorithms.
//! * [`checkpoint`] — bit-exact model snapshots.
//! * [`harness`] — experiment configuration, multi-seed orchestration,
//!   reporting, and the label-noise audit.
//!
//! Everything is deterministic given the seeds recorded in an experiment
//! config: reruns produce byte-identical metrics files regardless of thread
//! count.

pub mod checkpoint;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod net;
pub mod rng;
pub mod selection;
pub mod tensor;
pub mod trainers;

pub use error::{Error, Result};
pub use tensor::Tensor;

pub use ensemble::{DropoutMaskSet, WidenReport};
pub use net::{
    ActivationTrace, GradientBuffer, LayerSpec, Mode, NetworkSpec, OptimRule, OptimizerState,
    Parameters,
};

pub use data::{NoisyDataset, TransitionMatrix};
pub use harness::{ExperimentConfig, RunReport};
pub use selection::ForgetSchedule;
pub use trainers::{Algorithm, EpochMetrics, TrainerConfig};
