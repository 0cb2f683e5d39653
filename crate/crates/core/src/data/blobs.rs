//! Synthetic Gaussian-blob classification data.
//!
//! Class `c` is a unit-variance isotropic Gaussian centered at
//! `separation · e_c` (the c-th coordinate axis), which requires
//! `dim >= class_count`. Samples are generated class-major — all of class 0,
//! then class 1, and so on — drawing one Gaussian per coordinate in sample
//! order from a single seeded stream, so a given `(seed, test_split)` pair
//! always produces the same tensor. Train and test splits use different
//! stream domains and are therefore independent draws from the same
//! distribution.

use crate::data::NoisyDataset;
use crate::error::{Error, Result};
use crate::rng::{derive, domain, SplitMix64};
use crate::tensor::Tensor;

/// Generate `class_count * per_class` blob samples of dimension `dim`.
///
/// `test_split = false` draws the training split, `true` the (independent)
/// test split for the same seed.
pub fn synthetic_blobs(
    class_count: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
    test_split: bool,
) -> Result<NoisyDataset> {
    if class_count < 2 {
        return Err(Error::Config(format!(
            "blobs need at least 2 classes, got {class_count}"
        )));
    }
    if per_class == 0 {
        return Err(Error::Config("blobs need per_class >= 1".into()));
    }
    if dim < class_count {
        return Err(Error::Config(format!(
            "blob dimension {dim} cannot host {class_count} axis-aligned centers"
        )));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::Config(format!(
            "blob separation must be finite and non-negative, got {separation}"
        )));
    }

    let tag = if test_split {
        domain::BLOBS_TEST
    } else {
        domain::BLOBS
    };
    let mut rng = SplitMix64::new(derive(seed, &[tag]));

    let n = class_count * per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..class_count {
        for _ in 0..per_class {
            for coord in 0..dim {
                let center = if coord == class { separation } else { 0.0 };
                data.push(center + rng.next_gaussian());
            }
            labels.push(class);
        }
    }
    NoisyDataset::new(Tensor::new(vec![n, dim], data)?, labels, class_count)
}
