//! Network description, parameters, forward/backward passes, losses, and
//! optimizers.
//!
//! A network is a [`NetworkSpec`]: an input shape, an ordered list of
//! [`LayerSpec`]s, and a class count. Layers are referred to everywhere by
//! their index into that list — parameter maps, gradient buffers, dropout
//! masks, and error messages all share this keying.
//!
//! Supported layer kinds are deliberately few: `dense`, `conv2d` (valid
//! padding), `maxpool2x2`, `relu`, `softsign`, and `dropout`. There is no
//! batch normalization and no automatic differentiation of arbitrary graphs;
//! the backward pass is written by hand for this fixed vocabulary and checked
//! against central finite differences in the test suite.

mod backward;
mod forward;
mod kernels;
mod loss;
mod optim;
mod params;
pub mod presets;

pub use backward::{backward, backward_from_logit_grad};
pub use forward::{forward, forward_logits, ActivationTrace, Mode};
pub use loss::{
    argmax_rows, cross_entropy_per_sample, kl_div_per_sample, log_softmax_rows, softmax_rows,
};
pub use optim::{optimizer_step, OptimRule, OptimizerState};
pub use params::{init_parameters, GradientBuffer, LayerParams, Parameters};

use crate::error::{Error, Result};

/// Loss values are clamped at this ceiling so that selection ranking stays
/// finite even on pathologically confident wrong predictions.
pub const LOSS_CLAMP: f64 = 1e3;

/// One layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// Fully connected layer. Flattens whatever per-sample shape it receives.
    Dense { width: usize },
    /// 2-d convolution over `[channels, height, width]` inputs, valid
    /// padding, square kernel.
    Conv2d {
        channels: usize,
        kernel: usize,
        stride: usize,
    },
    /// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
    MaxPool2x2,
    /// Element-wise `max(x, 0)`.
    Relu,
    /// Element-wise `x / (1 + |x|)`.
    Softsign,
    /// Inverted dropout: at train time retained units are scaled by
    /// `1/(1−p)`; at eval time the layer is the identity.
    Dropout { p: f64 },
}

impl LayerSpec {
    /// True for layers that carry weights and biases.
    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    /// Output shape for a given per-sample input shape, or a description of
    /// why the layer cannot accept it.
    pub fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match self {
            LayerSpec::Dense { width } => {
                if *width == 0 {
                    return Err("dense width must be positive".into());
                }
                let fan_in: usize = input.iter().product();
                if fan_in == 0 {
                    return Err(format!("dense layer fed empty shape {input:?}"));
                }
                Ok(vec![*width])
            }
            LayerSpec::Conv2d {
                channels,
                kernel,
                stride,
            } => {
                if *channels == 0 || *kernel == 0 {
                    return Err("conv2d channels and kernel must be positive".into());
                }
                if *stride == 0 {
                    return Err("conv2d stride must be positive".into());
                }
                let [c, h, w]: [usize; 3] = match input {
                    [c, h, w] => [*c, *h, *w],
                    other => {
                        return Err(format!(
                            "conv2d expects [channels, height, width] input, got {other:?}"
                        ))
                    }
                };
                if c == 0 {
                    return Err("conv2d fed zero input channels".into());
                }
                if *kernel > h || *kernel > w {
                    return Err(format!(
                        "kernel {kernel} exceeds input spatial size {h}x{w}"
                    ));
                }
                Ok(vec![
                    *channels,
                    (h - kernel) / stride + 1,
                    (w - kernel) / stride + 1,
                ])
            }
            LayerSpec::MaxPool2x2 => {
                let [c, h, w]: [usize; 3] = match input {
                    [c, h, w] => [*c, *h, *w],
                    other => {
                        return Err(format!(
                            "maxpool2x2 expects [channels, height, width] input, got {other:?}"
                        ))
                    }
                };
                if h < 2 || w < 2 {
                    return Err(format!("maxpool2x2 needs spatial size ≥ 2, got {h}x{w}"));
                }
                Ok(vec![c, h / 2, w / 2])
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(p) {
                    return Err(format!("dropout probability {p} outside [0, 1)"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu | LayerSpec::Softsign => Ok(input.to_vec()),
        }
    }

    /// Short kind name used in manifests and error messages.
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2x2 => "maxpool2x2",
            LayerSpec::Relu => "relu",
            LayerSpec::Softsign => "softsign",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }
}

/// A validated network description.
///
/// Construction checks that every adjacent pair of layers is
/// shape-compatible and that the terminal layer is a dense layer of width
/// `class_count`. The per-layer input shapes computed during validation are
/// cached so forward/backward code can consult them cheaply.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    class_count: usize,
    /// `shapes[i]` is the per-sample shape entering layer `i`;
    /// `shapes[len]` is the output (logit) shape.
    shapes: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn new(
        layers: Vec<LayerSpec>,
        input_shape: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Config("class_count must be positive".into()));
        }
        if input_shape.is_empty() || input_shape.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "input shape {input_shape:?} must be nonempty with positive dims"
            )));
        }
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut shapes = Vec::with_capacity(layers.len() + 1);
        shapes.push(input_shape.clone());
        for (i, layer) in layers.iter().enumerate() {
            let out = layer
                .output_shape(shapes.last().expect("shapes nonempty"))
                .map_err(|detail| Error::shape(i, detail))?;
            shapes.push(out);
        }
        match layers.last() {
            Some(LayerSpec::Dense { width }) if *width == class_count => {}
            Some(last) => {
                return Err(Error::Config(format!(
                    "terminal layer must be dense of width {class_count}, got {} with output {:?}",
                    last.kind_name(),
                    shapes.last().expect("shapes nonempty"),
                )))
            }
            None => unreachable!("layers checked nonempty"),
        }
        Ok(NetworkSpec {
            layers,
            input_shape,
            class_count,
            shapes,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Per-sample shape entering layer `i` (so `shape_before(0)` is the
    /// input shape).
    pub fn shape_before(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    /// Per-sample shape leaving layer `i`.
    pub fn shape_after(&self, i: usize) -> &[usize] {
        &self.shapes[i + 1]
    }

    /// Number of elements in the per-sample shape entering layer `i`.
    pub fn width_before(&self, i: usize) -> usize {
        self.shapes[i].iter().product()
    }

    /// Indices of parameterized (dense/conv2d) layers, in network order.
    pub fn parameterized_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_parameterized())
            .map(|(i, _)| i)
            .collect()
    }

    /// Dropout sites as `(layer index, p, site width)` where the width is
    /// the number of per-sample activation elements the mask covers.
    pub fn dropout_sites(&self) -> Vec<(usize, f64, usize)> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                LayerSpec::Dropout { p } => Some((i, *p, self.width_before(i))),
                _ => None,
            })
            .collect()
    }

    /// Position of layer `i` among the parameterized layers.
    ///
    /// Initialization streams are keyed by this ordinal rather than the raw
    /// layer index, so a network and its dropout-augmented transform (which
    /// shifts layer indices) draw identical initial weights from the same
    /// seed.
    pub fn param_ordinal(&self, i: usize) -> Option<usize> {
        if !self.layers.get(i)?.is_parameterized() {
            return None;
        }
        Some(
            self.layers[..i]
                .iter()
                .filter(|l| l.is_parameterized())
                .count(),
        )
    }

    /// True if the layer after `i` (skipping dropout sites) is a ReLU.
    /// Decides the init scale: `sqrt(2/fan_in)` for ReLU-fed layers,
    /// `sqrt(1/fan_in)` otherwise.
    pub(crate) fn feeds_relu(&self, i: usize) -> bool {
        for layer in &self.layers[i + 1..] {
            match layer {
                LayerSpec::Dropout { .. } => continue,
                LayerSpec::Relu => return true,
                _ => return false,
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp() -> NetworkSpec {
        NetworkSpec::new(
            vec![
                LayerSpec::Dense { width: 4 },
                LayerSpec::Relu,
                LayerSpec::Dense { width: 3 },
            ],
            vec![5],
            3,
        )
        .unwrap()
    }

    #[test]
    fn shapes_chain_through_layers() {
        let spec = mlp();
        assert_eq!(spec.shape_before(0), &[5]);
        assert_eq!(spec.shape_before(2), &[4]);
        assert_eq!(spec.shape_after(2), &[3]);
    }

    #[test]
    fn terminal_layer_must_match_class_count() {
        let err = NetworkSpec::new(
            vec![LayerSpec::Dense { width: 4 }, LayerSpec::Relu],
            vec![5],
            4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");

        let err = NetworkSpec::new(vec![LayerSpec::Dense { width: 4 }], vec![5], 3).unwrap_err();
        assert!(err.to_string().contains("width 3"), "{err}");
    }

    #[test]
    fn conv_chain_shapes() {
        // 3x32x32 → conv(16,k5,s1) → 16x28x28 → pool → 16x14x14.
        let spec = NetworkSpec::new(
            vec![
                LayerSpec::Conv2d {
                    channels: 16,
                    kernel: 5,
                    stride: 1,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Dense { width: 10 },
            ],
            vec![3, 32, 32],
            10,
        )
        .unwrap();
        assert_eq!(spec.shape_after(0), &[16, 28, 28]);
        assert_eq!(spec.shape_after(2), &[16, 14, 14]);
        assert_eq!(spec.width_before(3), 16 * 14 * 14);
    }

    #[test]
    fn incompatible_shapes_name_the_layer() {
        let err = NetworkSpec::new(
            vec![
                LayerSpec::Dense { width: 4 },
                LayerSpec::MaxPool2x2, // pooling a rank-1 activation
                LayerSpec::Dense { width: 3 },
            ],
            vec![5],
            3,
        )
        .unwrap_err();
        match err {
            Error::Shape { layer, .. } => assert_eq!(layer, 1),
            other => panic!("expected shape error, got {other}"),
        }
    }

    #[test]
    fn dropout_p_must_be_below_one() {
        let err = NetworkSpec::new(
            vec![LayerSpec::Dropout { p: 1.0 }, LayerSpec::Dense { width: 2 }],
            vec![3],
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 0, .. }), "{err}");
    }

    #[test]
    fn param_ordinals_skip_activation_layers() {
        let spec = NetworkSpec::new(
            vec![
                LayerSpec::Dropout { p: 0.5 },
                LayerSpec::Dense { width: 4 },
                LayerSpec::Relu,
                LayerSpec::Dropout { p: 0.5 },
                LayerSpec::Dense { width: 3 },
            ],
            vec![5],
            3,
        )
        .unwrap();
        assert_eq!(spec.param_ordinal(1), Some(0));
        assert_eq!(spec.param_ordinal(4), Some(1));
        assert_eq!(spec.param_ordinal(2), None);
        assert_eq!(spec.parameterized_layers(), vec![1, 4]);
        assert_eq!(spec.dropout_sites(), vec![(0, 0.5, 5), (3, 0.5, 4)]);
    }

    #[test]
    fn feeds_relu_looks_through_dropout() {
        let spec = NetworkSpec::new(
            vec![
                LayerSpec::Dense { width: 4 },
                LayerSpec::Dropout { p: 0.3 },
                LayerSpec::Relu,
                LayerSpec::Dense { width: 3 },
            ],
            vec![5],
            3,
        )
        .unwrap();
        assert!(spec.feeds_relu(0));
        assert!(!spec.feeds_relu(3)); // terminal layer feeds the loss
    }
}
