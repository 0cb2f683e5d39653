//! The forward pass.
//!
//! [`forward`] runs a batch through a network and returns an
//! [`ActivationTrace`] holding the input and every layer output — enough for
//! [`crate::net::backward`] to run without recomputation. When only logits
//! are needed (evaluation, or the "re-forward" instance whose outputs are
//! gradient constants), [`forward_logits`] performs the same arithmetic while
//! retaining nothing but the final tensor.

use crate::ensemble::DropoutMaskSet;
use crate::error::{Error, Result};
use crate::net::kernels;
use crate::net::{LayerSpec, NetworkSpec, Parameters};
use crate::tensor::Tensor;

/// Train mode applies inverted dropout at dropout sites; eval mode treats
/// them as identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// All intermediate activations of one forward pass.
///
/// `activation(i)` is the tensor *entering* layer `i`; `logits()` is the
/// network output. The trace remembers the mask seed it was computed with so
/// a backward pass against different masks is rejected instead of silently
/// producing wrong gradients.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    activations: Vec<Tensor>,
    mode: Mode,
    mask_seed: Option<u64>,
}

impl ActivationTrace {
    pub fn logits(&self) -> &Tensor {
        self.activations.last().expect("trace is never empty")
    }

    /// Input of layer `i` (so `activation(0)` is the batch itself).
    pub fn activation(&self, i: usize) -> &Tensor {
        &self.activations[i]
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn mask_seed(&self) -> Option<u64> {
        self.mask_seed
    }

    pub fn batch_rows(&self) -> usize {
        self.activations[0].rows()
    }
}

/// Validate the batch/mask combination shared by both forward entry points.
fn check_inputs(
    spec: &NetworkSpec,
    params: &Parameters,
    batch: &Tensor,
    masks: Option<&DropoutMaskSet>,
    mode: Mode,
) -> Result<()> {
    if batch.rows() == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    if batch.row_shape() != spec.input_shape() {
        return Err(Error::shape(
            0,
            format!(
                "batch per-sample shape {:?} does not match network input {:?}",
                batch.row_shape(),
                spec.input_shape()
            ),
        ));
    }
    let has_sites = !spec.dropout_sites().is_empty();
    match (mode, masks, has_sites) {
        (Mode::Train, None, true) => {
            return Err(Error::Config(
                "train-mode forward through a network with dropout sites requires a mask set"
                    .into(),
            ))
        }
        (Mode::Train, Some(m), true) => m.check_matches(spec)?,
        (Mode::Train, Some(_), false) => {
            return Err(Error::Config(
                "mask set supplied for a network without dropout sites".into(),
            ))
        }
        (Mode::Eval, Some(_), _) => {
            return Err(Error::Config(
                "eval-mode forward does not take masks (dropout is identity)".into(),
            ))
        }
        _ => {}
    }
    for i in spec.parameterized_layers() {
        if params.get(i).is_none() {
            return Err(Error::Config(format!("parameters missing for layer {i}")));
        }
    }
    Ok(())
}

/// Kept input columns for a dense layer sitting right behind an active
/// dropout site. The masked input is exactly zero on dropped columns, so the
/// matrix product (and its gradients) can be computed on the kept columns
/// alone — that is the thin sub-network the mask set denotes, computed
/// thinly. Returns `None` whenever compaction does not apply: eval mode, no
/// preceding dropout layer, or an all-retain mask (in particular p = 0, so
/// the reduced configurations keep bit-identical full-width arithmetic).
pub(crate) fn masked_dense_kept(
    spec: &NetworkSpec,
    i: usize,
    masks: Option<&DropoutMaskSet>,
    mode: Mode,
) -> Option<Vec<usize>> {
    if mode != Mode::Train || i == 0 || !matches!(spec.layers()[i - 1], LayerSpec::Dropout { .. }) {
        return None;
    }
    let mask = masks?.site(i - 1)?;
    let kept: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(j, &keep)| keep.then_some(j))
        .collect();
    (kept.len() < mask.len()).then_some(kept)
}

/// Compute the output of layer `i` for `input` (`[rows, …]`).
fn apply_layer(
    spec: &NetworkSpec,
    params: &Parameters,
    i: usize,
    input: &Tensor,
    masks: Option<&DropoutMaskSet>,
    mode: Mode,
) -> Result<Tensor> {
    let rows = input.rows();
    match &spec.layers()[i] {
        LayerSpec::Dense { width } => {
            let lp = params.get(i).expect("checked in check_inputs");
            let in_w = spec.width_before(i);
            if lp.weight.shape() != [*width, in_w] {
                return Err(Error::shape(
                    i,
                    format!(
                        "dense weight shape {:?}, expected [{width}, {in_w}]",
                        lp.weight.shape()
                    ),
                ));
            }
            let mut out = Tensor::zeros(vec![rows, *width]);
            if let Some(kept) = masked_dense_kept(spec, i, masks, mode) {
                let xk = kernels::gather_cols(input.data(), in_w, &kept);
                let wk = kernels::gather_cols(lp.weight.data(), in_w, &kept);
                kernels::dense_forward(
                    &xk,
                    &wk,
                    lp.bias.data(),
                    out.data_mut(),
                    kept.len(),
                    *width,
                );
            } else {
                kernels::dense_forward(
                    input.data(),
                    lp.weight.data(),
                    lp.bias.data(),
                    out.data_mut(),
                    in_w,
                    *width,
                );
            }
            Ok(out)
        }
        LayerSpec::Conv2d {
            channels,
            kernel,
            stride,
        } => {
            let lp = params.get(i).expect("checked in check_inputs");
            let in_shape = spec.shape_before(i);
            let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
            if lp.weight.shape() != [*channels, c, *kernel, *kernel] {
                return Err(Error::shape(
                    i,
                    format!(
                        "conv weight shape {:?}, expected [{channels}, {c}, {kernel}, {kernel}]",
                        lp.weight.shape()
                    ),
                ));
            }
            let mut out_shape = vec![rows];
            out_shape.extend_from_slice(spec.shape_after(i));
            let mut out = Tensor::zeros(out_shape);
            kernels::conv2d_forward(
                input.data(),
                lp.weight.data(),
                lp.bias.data(),
                out.data_mut(),
                (c, h, w),
                (*channels, *kernel, *stride),
            );
            Ok(out)
        }
        LayerSpec::MaxPool2x2 => {
            let in_shape = spec.shape_before(i);
            let mut out_shape = vec![rows];
            out_shape.extend_from_slice(spec.shape_after(i));
            let mut out = Tensor::zeros(out_shape);
            kernels::maxpool_forward(
                input.data(),
                out.data_mut(),
                (in_shape[0], in_shape[1], in_shape[2]),
            );
            Ok(out)
        }
        LayerSpec::Relu => {
            let mut out = input.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Ok(out)
        }
        LayerSpec::Softsign => {
            let mut out = input.clone();
            for v in out.data_mut() {
                *v /= 1.0 + v.abs();
            }
            Ok(out)
        }
        LayerSpec::Dropout { p } => match mode {
            Mode::Eval => Ok(input.clone()),
            Mode::Train => {
                let mask = masks
                    .expect("checked in check_inputs")
                    .site(i)
                    .expect("site presence checked in check_inputs");
                let scale = 1.0 / (1.0 - p);
                let width = input.row_len();
                let mut out = input.clone();
                for row in out.data_mut().chunks_exact_mut(width) {
                    for (v, &keep) in row.iter_mut().zip(mask) {
                        *v = if keep { *v * scale } else { 0.0 };
                    }
                }
                Ok(out)
            }
        },
    }
}

/// Forward pass retaining every intermediate activation.
pub fn forward(
    spec: &NetworkSpec,
    params: &Parameters,
    batch: &Tensor,
    masks: Option<&DropoutMaskSet>,
    mode: Mode,
) -> Result<ActivationTrace> {
    check_inputs(spec, params, batch, masks, mode)?;
    let mut activations = Vec::with_capacity(spec.layers().len() + 1);
    activations.push(batch.clone());
    for i in 0..spec.layers().len() {
        let out = apply_layer(spec, params, i, activations.last().expect("nonempty"), masks, mode)?;
        activations.push(out);
    }
    Ok(ActivationTrace {
        activations,
        mode,
        mask_seed: masks.map(|m| m.seed()),
    })
}

/// Forward pass retaining only the logits. Performs exactly the same
/// arithmetic as [`forward`]; used for evaluation and for instances whose
/// outputs are treated as constants.
pub fn forward_logits(
    spec: &NetworkSpec,
    params: &Parameters,
    batch: &Tensor,
    masks: Option<&DropoutMaskSet>,
    mode: Mode,
) -> Result<Tensor> {
    check_inputs(spec, params, batch, masks, mode)?;
    let mut current = batch.clone();
    for i in 0..spec.layers().len() {
        current = apply_layer(spec, params, i, &current, masks, mode)?;
    }
    Ok(current)
}
