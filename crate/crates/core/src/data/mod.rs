//! Datasets, label noise, and mini-batch iteration.
//!
//! A [`NoisyDataset`] carries features plus *two* label sequences: the true
//! labels and the noisy labels actually shown to trainers. Keeping both (and
//! the derived `flip_mask`) is what lets the harness report label precision
//! — the fraction of selected samples whose noisy label is correct — without
//! ever letting the trainer peek at ground truth.
//!
//! Features are stored behind an `Arc` so the multi-seed harness can share
//! one loaded copy of e.g. MNIST across per-seed noise injections.

mod blobs;
mod cifar;
mod mnist;
mod noise;

pub use blobs::synthetic_blobs;
pub use cifar::{load_cifar10, load_cifar100};
pub use mnist::load_mnist;
pub use noise::{build_transition_matrix, inject_noise, NoiseKind, TransitionMatrix};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Features plus true/noisy label pairs.
#[derive(Debug, Clone)]
pub struct NoisyDataset {
    features: Arc<Tensor>,
    true_labels: Vec<usize>,
    noisy_labels: Vec<usize>,
    /// `flip_mask[i]` ⇔ `noisy_labels[i] != true_labels[i]`.
    flip_mask: Vec<bool>,
    class_count: usize,
    noise_kind: NoiseKind,
    noise_rate: f64,
}

impl NoisyDataset {
    /// A clean dataset: noisy labels equal true labels.
    pub fn new(features: Tensor, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::LabelRange {
                sample: i,
                label: l,
                class_count,
            });
        }
        let n = labels.len();
        Ok(NoisyDataset {
            features: Arc::new(features),
            noisy_labels: labels.clone(),
            true_labels: labels,
            flip_mask: vec![false; n],
            class_count,
            noise_kind: NoiseKind::None,
            noise_rate: 0.0,
        })
    }

    /// Derive a noisy sibling of this dataset: true labels are re-noised
    /// through `matrix`, features are shared (cheap `Arc` clone).
    pub fn with_noise(&self, matrix: &TransitionMatrix, seed: u64) -> Result<NoisyDataset> {
        if matrix.class_count() != self.class_count {
            return Err(Error::Config(format!(
                "transition matrix has {} classes, dataset has {}",
                matrix.class_count(),
                self.class_count
            )));
        }
        let (noisy_labels, flip_mask) = inject_noise(&self.true_labels, matrix, seed)?;
        Ok(NoisyDataset {
            features: Arc::clone(&self.features),
            true_labels: self.true_labels.clone(),
            noisy_labels,
            flip_mask,
            class_count: self.class_count,
            noise_kind: matrix.kind(),
            noise_rate: matrix.rate(),
        })
    }

    /// Zero-sample dataset, constructible only from tests: the public
    /// constructors reject emptiness, but consumers such as `evaluate`
    /// still guard against it and need a way to exercise that path.
    #[cfg(test)]
    pub(crate) fn empty_for_tests(dim: usize, class_count: usize) -> NoisyDataset {
        NoisyDataset {
            features: Arc::new(Tensor::zeros(vec![0, dim])),
            true_labels: Vec::new(),
            noisy_labels: Vec::new(),
            flip_mask: Vec::new(),
            class_count,
            noise_kind: NoiseKind::None,
            noise_rate: 0.0,
        }
    }

    /// First `n` samples (keeps load order). Used for smoke-scale runs.
    pub fn truncate(&self, n: usize) -> Result<NoisyDataset> {
        if n == 0 || n > self.len() {
            return Err(Error::Config(format!(
                "cannot truncate dataset of {} samples to {n}",
                self.len()
            )));
        }
        let idx: Vec<usize> = (0..n).collect();
        Ok(NoisyDataset {
            features: Arc::new(self.features.gather_rows(&idx)?),
            true_labels: self.true_labels[..n].to_vec(),
            noisy_labels: self.noisy_labels[..n].to_vec(),
            flip_mask: self.flip_mask[..n].to_vec(),
            class_count: self.class_count,
            noise_kind: self.noise_kind,
            noise_rate: self.noise_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    /// Per-sample feature shape (what a network's `input_shape` must match).
    pub fn feature_shape(&self) -> &[usize] {
        self.features.row_shape()
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn noisy_labels(&self) -> &[usize] {
        &self.noisy_labels
    }

    pub fn flip_mask(&self) -> &[bool] {
        &self.flip_mask
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise_kind
    }

    pub fn noise_rate(&self) -> f64 {
        self.noise_rate
    }

    /// Fraction of samples whose label was actually flipped.
    pub fn flip_fraction(&self) -> f64 {
        self.flip_mask.iter().filter(|&&b| b).count() as f64 / self.len() as f64
    }
}

/// One shuffled slice of a dataset.
#[derive(Debug, Clone)]
pub struct MiniBatch {
    /// Gathered features, `[batch, …feature_shape]`.
    pub features: Tensor,
    /// Noisy labels, index-aligned with `features` rows.
    pub noisy_labels: Vec<usize>,
    /// Original dataset indices of each row.
    pub indices: Vec<usize>,
    /// Flip-mask slice (true where the noisy label is wrong).
    pub flip_mask: Vec<bool>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.noisy_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy_labels.is_empty()
    }
}

/// Iterate a dataset in seeded-shuffled mini-batches of size `b` (the final
/// batch may be short). The permutation is Fisher–Yates over
/// `SplitMix64(epoch_seed)` — see [`crate::rng::SplitMix64::shuffle`] for
/// the exact draw sequence.
pub fn batch_iter(dataset: &NoisyDataset, b: usize, epoch_seed: u64) -> Result<BatchIter<'_>> {
    if b == 0 {
        return Err(Error::Config("batch size must be ≥ 1".into()));
    }
    let mut perm: Vec<usize> = (0..dataset.len()).collect();
    SplitMix64::new(epoch_seed).shuffle(&mut perm);
    Ok(BatchIter {
        dataset,
        perm,
        pos: 0,
        b,
    })
}

pub struct BatchIter<'a> {
    dataset: &'a NoisyDataset,
    perm: Vec<usize>,
    pos: usize,
    b: usize,
}

impl BatchIter<'_> {
    /// Number of batches this iterator will yield in total.
    pub fn batch_count(&self) -> usize {
        self.perm.len().div_ceil(self.b)
    }
}

impl Iterator for BatchIter<'_> {
    type Item = MiniBatch;

    fn next(&mut self) -> Option<MiniBatch> {
        if self.pos >= self.perm.len() {
            return None;
        }
        let end = (self.pos + self.b).min(self.perm.len());
        let indices = self.perm[self.pos..end].to_vec();
        self.pos = end;
        let features = self
            .dataset
            .features
            .gather_rows(&indices)
            .expect("permutation indices are in range");
        let noisy_labels = indices.iter().map(|&i| self.dataset.noisy_labels[i]).collect();
        let flip_mask = indices.iter().map(|&i| self.dataset.flip_mask[i]).collect();
        Some(MiniBatch {
            features,
            noisy_labels,
            indices,
            flip_mask,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset(n: usize, classes: usize) -> NoisyDataset {
        let features = Tensor::new(vec![n, 2], (0..2 * n).map(|i| i as f64).collect()).unwrap();
        let labels = (0..n).map(|i| i % classes).collect();
        NoisyDataset::new(features, labels, classes).unwrap()
    }

    #[test]
    fn constructor_checks_labels_and_lengths() {
        let features = Tensor::zeros(vec![3, 2]);
        assert!(NoisyDataset::new(features.clone(), vec![0, 1], 2).is_err());
        assert!(NoisyDataset::new(features.clone(), vec![0, 1, 2], 2).is_err());
        assert!(NoisyDataset::new(features, vec![0, 1, 1], 2).is_ok());
    }

    #[test]
    fn flip_mask_consistency_after_noise() {
        let ds = tiny_dataset(500, 4);
        let m = build_transition_matrix(NoiseKind::Symmetric, 0.4, 4).unwrap();
        let noisy = ds.with_noise(&m, 11).unwrap();
        for i in 0..noisy.len() {
            assert_eq!(
                noisy.flip_mask()[i],
                noisy.noisy_labels()[i] != noisy.true_labels()[i],
                "sample {i}"
            );
        }
        assert!(noisy.flip_fraction() > 0.2, "noise actually applied");
    }

    #[test]
    fn batches_partition_the_dataset() {
        // N=10, B=3 → sizes 3,3,3,1 covering every index exactly once.
        let ds = tiny_dataset(10, 2);
        let batches: Vec<MiniBatch> = batch_iter(&ds, 3, 42).unwrap().collect();
        assert_eq!(
            batches.iter().map(MiniBatch::len).collect::<Vec<_>>(),
            vec![3, 3, 3, 1]
        );
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn same_epoch_seed_same_order() {
        let ds = tiny_dataset(20, 2);
        let a: Vec<Vec<usize>> = batch_iter(&ds, 6, 7).unwrap().map(|b| b.indices).collect();
        let b: Vec<Vec<usize>> = batch_iter(&ds, 6, 7).unwrap().map(|b| b.indices).collect();
        let c: Vec<Vec<usize>> = batch_iter(&ds, 6, 8).unwrap().map(|b| b.indices).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn batch_contents_match_independent_permutation_oracle() {
        // Reimplement the documented shuffle independently: Fisher–Yates,
        // descending i, j = next_u64() % (i+1), over SplitMix64(epoch_seed).
        let ds = tiny_dataset(6, 2);
        let seed = 99;
        let mut perm: Vec<usize> = (0..6).collect();
        let mut rng = crate::rng::SplitMix64::new(seed);
        for i in (1..6usize).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let batches: Vec<MiniBatch> = batch_iter(&ds, 2, seed).unwrap().collect();
        let got: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        assert_eq!(got, perm);

        // Gathered features/labels align with the permuted indices.
        for batch in &batches {
            for (r, &i) in batch.indices.iter().enumerate() {
                assert_eq!(batch.features.row(r), ds.features().row(i));
                assert_eq!(batch.noisy_labels[r], ds.noisy_labels()[i]);
            }
        }
    }

    #[test]
    fn truncate_keeps_prefix() {
        let ds = tiny_dataset(10, 2);
        let t = ds.truncate(4).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.features().rows(), 4);
        assert_eq!(t.true_labels(), &ds.true_labels()[..4]);
        assert!(ds.truncate(0).is_err());
        assert!(ds.truncate(11).is_err());
    }
}
