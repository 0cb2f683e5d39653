//! Base architecture presets.
//!
//! These are the *unmodified* base models; the dropout-ensemble module turns
//! any of them into a widened DropoutNet. Presets bind to datasets by
//! convention: `mnist_mlp` ↔ MNIST, `cnn_small` ↔ CIFAR-10, `cnn_large` ↔
//! CIFAR-100, and `blob_mlp` ↔ the synthetic Gaussian-blob surrogate used by
//! fast tests.
//!
//! The CNN presets are plain conv/relu/pool stacks without batch
//! normalization, trading a little accuracy for a small, hand-checkable
//! numerical core.

use crate::error::{Error, Result};
use crate::net::{LayerSpec, NetworkSpec};

/// 784–256–10 MLP with ReLU, for 28×28 grayscale images.
pub fn mnist_mlp() -> NetworkSpec {
    NetworkSpec::new(
        vec![
            LayerSpec::Dense { width: 256 },
            LayerSpec::Relu,
            LayerSpec::Dense { width: 10 },
        ],
        vec![1, 28, 28],
        10,
    )
    .expect("mnist_mlp preset is well-formed")
}

/// Two conv blocks + three dense layers for 3×32×32 images.
///
/// Shape chain: 3×32×32 → conv5×5(16) → 16×28×28 → pool → 16×14×14 →
/// conv5×5(32) → 32×10×10 → pool → 32×5×5 → dense 128 → dense 64 → dense C.
pub fn cnn_small(class_count: usize) -> Result<NetworkSpec> {
    NetworkSpec::new(
        vec![
            LayerSpec::Conv2d {
                channels: 16,
                kernel: 5,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2x2,
            LayerSpec::Conv2d {
                channels: 32,
                kernel: 5,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2x2,
            LayerSpec::Dense { width: 128 },
            LayerSpec::Relu,
            LayerSpec::Dense { width: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense {
                width: class_count,
            },
        ],
        vec![3, 32, 32],
        class_count,
    )
}

/// Six conv layers + a single dense classifier for 3×32×32 images.
///
/// Shape chain: 3×32×32 → conv3×3(32) → 30² → conv3×3(32) → 28² → pool →
/// 14² → conv3×3(64) → 12² → conv3×3(64) → 10² → pool → 5² → conv3×3(128) →
/// 3² → conv3×3(128) → 1² → dense C. The single dense layer means the
/// dropout transform places exactly one site, at the penultimate position.
pub fn cnn_large(class_count: usize) -> Result<NetworkSpec> {
    let conv = |channels| LayerSpec::Conv2d {
        channels,
        kernel: 3,
        stride: 1,
    };
    NetworkSpec::new(
        vec![
            conv(32),
            LayerSpec::Relu,
            conv(32),
            LayerSpec::Relu,
            LayerSpec::MaxPool2x2,
            conv(64),
            LayerSpec::Relu,
            conv(64),
            LayerSpec::Relu,
            LayerSpec::MaxPool2x2,
            conv(128),
            LayerSpec::Relu,
            conv(128),
            LayerSpec::Relu,
            LayerSpec::Dense {
                width: class_count,
            },
        ],
        vec![3, 32, 32],
        class_count,
    )
}

/// Small ReLU MLP over flat feature vectors, for synthetic-blob experiments.
pub fn blob_mlp(dim: usize, class_count: usize, hidden: &[usize]) -> Result<NetworkSpec> {
    if hidden.is_empty() {
        return Err(Error::Config(
            "blob_mlp needs at least one hidden width".into(),
        ));
    }
    let mut layers = Vec::with_capacity(hidden.len() * 2 + 1);
    for &w in hidden {
        layers.push(LayerSpec::Dense { width: w });
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::Dense {
        width: class_count,
    });
    NetworkSpec::new(layers, vec![dim], class_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_mlp_is_two_dense_relu() {
        let spec = mnist_mlp();
        assert_eq!(spec.parameterized_layers().len(), 2);
        assert_eq!(spec.input_shape(), &[1, 28, 28]);
        assert_eq!(spec.class_count(), 10);
        assert_eq!(spec.shape_after(0), &[256]);
    }

    #[test]
    fn cnn_small_is_two_conv_three_dense() {
        let spec = cnn_small(10).unwrap();
        let conv = spec
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv2d { .. }))
            .count();
        let dense = spec
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Dense { .. }))
            .count();
        assert_eq!((conv, dense), (2, 3));
        // Flattened conv output feeding the first dense layer: 32·5·5.
        assert_eq!(spec.width_before(6), 800);
    }

    #[test]
    fn cnn_large_is_six_conv_one_dense() {
        let spec = cnn_large(100).unwrap();
        let conv = spec
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv2d { .. }))
            .count();
        let dense = spec
            .layers()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Dense { .. }))
            .count();
        assert_eq!((conv, dense), (6, 1));
        // Final conv collapses to 128×1×1.
        assert_eq!(spec.width_before(spec.layers().len() - 1), 128);
    }

    #[test]
    fn blob_mlp_shapes() {
        let spec = blob_mlp(20, 5, &[32, 16]).unwrap();
        assert_eq!(spec.input_shape(), &[20]);
        assert_eq!(spec.parameterized_layers().len(), 3);
        assert!(blob_mlp(20, 5, &[]).is_err());
    }
}
