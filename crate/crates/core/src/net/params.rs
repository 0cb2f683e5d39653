//! Parameter storage and initialization.
//!
//! Weights and biases live in a `BTreeMap` keyed by layer index, so the key
//! set is exactly the set of parameterized layers in the owning
//! [`NetworkSpec`] and iteration order is deterministic. The same container
//! doubles as the gradient buffer ([`GradientBuffer`] is a type alias with
//! congruent shapes).
//!
//! Weight layouts:
//! * dense: weight `[out, in]` (row `o` holds the fan-in of output unit
//!   `o`), bias `[out]`;
//! * conv2d: weight `[out_c, in_c, k, k]`, bias `[out_c]`.
//!
//! Initialization draws weights element-wise in row-major order from a
//! per-layer SplitMix64 stream seeded by `derive(seed, [INIT_LAYER,
//! ordinal])`, where `ordinal` is the layer's position among parameterized
//! layers. Keying by ordinal (not raw index) means a base network and its
//! dropout-augmented transform initialize identically from the same seed —
//! which is what makes the p=0 reduction tests bit-exact. Scales follow the
//! He/Xavier convention: std `sqrt(2/fan_in)` for layers feeding a ReLU,
//! `sqrt(1/fan_in)` otherwise. Biases are zero.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::net::{LayerSpec, NetworkSpec};
use crate::rng::{self, domain, SplitMix64};
use crate::tensor::Tensor;

/// Weight and bias for one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    fn zeros_like(other: &LayerParams) -> LayerParams {
        LayerParams {
            weight: Tensor::zeros(other.weight.shape().to_vec()),
            bias: Tensor::zeros(other.bias.shape().to_vec()),
        }
    }
}

/// All parameters of a network, keyed by layer index.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    layers: BTreeMap<usize, LayerParams>,
}

/// Gradients w.r.t. every parameter; same keying and shapes as
/// [`Parameters`].
pub type GradientBuffer = Parameters;

impl Parameters {
    pub fn new(layers: BTreeMap<usize, LayerParams>) -> Self {
        Parameters { layers }
    }

    /// Zero-filled buffer shape-congruent with `self`.
    pub fn zeros_like(&self) -> Parameters {
        Parameters {
            layers: self
                .layers
                .iter()
                .map(|(&k, v)| (k, LayerParams::zeros_like(v)))
                .collect(),
        }
    }

    pub fn get(&self, layer: usize) -> Option<&LayerParams> {
        self.layers.get(&layer)
    }

    pub fn get_mut(&mut self, layer: usize) -> Option<&mut LayerParams> {
        self.layers.get_mut(&layer)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LayerParams)> {
        self.layers.iter().map(|(&k, v)| (k, v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (usize, &mut LayerParams)> {
        self.layers.iter_mut().map(|(&k, v)| (k, v))
    }

    pub fn layer_indices(&self) -> Vec<usize> {
        self.layers.keys().copied().collect()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.layers
            .values()
            .map(|lp| lp.weight.len() + lp.bias.len())
            .sum()
    }

    /// Error unless `other` has the same keys and tensor shapes.
    pub fn check_congruent(&self, other: &Parameters, what: &str) -> Result<()> {
        if self.layers.len() != other.layers.len()
            || !self.layers.keys().eq(other.layers.keys())
        {
            return Err(Error::Config(format!(
                "{what}: layer key sets differ ({:?} vs {:?})",
                self.layer_indices(),
                other.layer_indices()
            )));
        }
        for (&k, a) in &self.layers {
            let b = &other.layers[&k];
            if a.weight.shape() != b.weight.shape() || a.bias.shape() != b.bias.shape() {
                return Err(Error::shape(
                    k,
                    format!(
                        "{what}: weight {:?}/{:?}, bias {:?}/{:?}",
                        a.weight.shape(),
                        b.weight.shape(),
                        a.bias.shape(),
                        b.bias.shape()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Sum of squared entries across all tensors (for gradient-norm tests).
    pub fn squared_norm(&self) -> f64 {
        self.layers
            .values()
            .map(|lp| {
                lp.weight.data().iter().map(|x| x * x).sum::<f64>()
                    + lp.bias.data().iter().map(|x| x * x).sum::<f64>()
            })
            .sum()
    }
}

/// Shapes for one layer's parameters given the spec.
fn param_shapes(spec: &NetworkSpec, i: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    match spec.layers()[i] {
        LayerSpec::Dense { width } => {
            let fan_in = spec.width_before(i);
            Some((vec![width, fan_in], vec![width]))
        }
        LayerSpec::Conv2d {
            channels, kernel, ..
        } => {
            let in_c = spec.shape_before(i)[0];
            Some((vec![channels, in_c, kernel, kernel], vec![channels]))
        }
        _ => None,
    }
}

/// Fan-in of a parameterized layer: full input width for dense, receptive
/// field `in_c·k·k` for conv.
fn fan_in(spec: &NetworkSpec, i: usize) -> usize {
    match spec.layers()[i] {
        LayerSpec::Dense { .. } => spec.width_before(i),
        LayerSpec::Conv2d { kernel, .. } => spec.shape_before(i)[0] * kernel * kernel,
        _ => unreachable!("fan_in of non-parameterized layer"),
    }
}

/// Seeded He/Xavier initialization; see the module docs for the exact
/// stream layout.
pub fn init_parameters(spec: &NetworkSpec, seed: u64) -> Parameters {
    let mut layers = BTreeMap::new();
    for i in spec.parameterized_layers() {
        let ordinal = spec
            .param_ordinal(i)
            .expect("parameterized_layers returned a parameterized index") as u64;
        let mut stream = SplitMix64::new(rng::derive(seed, &[domain::INIT_LAYER, ordinal]));
        let (w_shape, b_shape) = param_shapes(spec, i).expect("parameterized layer has shapes");
        let std = if spec.feeds_relu(i) {
            (2.0 / fan_in(spec, i) as f64).sqrt()
        } else {
            (1.0 / fan_in(spec, i) as f64).sqrt()
        };
        let n: usize = w_shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(stream.next_gaussian() * std);
        }
        layers.insert(
            i,
            LayerParams {
                weight: Tensor::new(w_shape, data).expect("shape/data consistent by construction"),
                bias: Tensor::zeros(b_shape),
            },
        );
    }
    Parameters { layers }
}
