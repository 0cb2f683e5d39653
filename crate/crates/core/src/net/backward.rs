//! The backward pass.
//!
//! [`backward`] computes the gradient of the mean cross-entropy over a
//! *selected subset* of the batch — selection being how small-loss training
//! restricts each update — with respect to every parameter. It consumes an
//! [`ActivationTrace`] from a train-mode [`crate::net::forward`] call and
//! the very same mask set; a trace/mask pairing mismatch is an error, not a
//! silent wrong answer.
//!
//! [`backward_from_logit_grad`] is the same machinery with a caller-supplied
//! `∂loss/∂logits`, which is how composite objectives (the joint
//! co-regularized loss) reuse the layer-by-layer pass.
//!
//! The gradient is of the *unclamped* cross-entropy; the 1e3 clamp in
//! [`crate::net::cross_entropy_per_sample`] affects only reported values and
//! selection ranking.
//!
//! Gradients flowing through units dropped by the mask are exactly zero,
//! which realizes "only update through the current instance": parameters
//! reachable only via dropped units receive a 0.0 entry, bit-exactly.

use crate::ensemble::DropoutMaskSet;
use crate::error::{Error, Result};
use crate::net::kernels;
use crate::net::loss::softmax_rows;
use crate::net::{ActivationTrace, GradientBuffer, LayerSpec, Mode, NetworkSpec, Parameters};
use crate::tensor::Tensor;

/// Shared validation for both backward entry points. Returns the gathered
/// per-layer activations (selected rows only).
fn gather_and_check(
    spec: &NetworkSpec,
    params: &Parameters,
    trace: &ActivationTrace,
    masks: Option<&DropoutMaskSet>,
    selected: &[usize],
) -> Result<Vec<Tensor>> {
    if trace.mode() != Mode::Train {
        return Err(Error::Config(
            "backward requires a train-mode activation trace".into(),
        ));
    }
    if trace.mask_seed() != masks.map(|m| m.seed()) {
        return Err(Error::Mask(format!(
            "trace was computed with mask seed {:?}, backward called with {:?}",
            trace.mask_seed(),
            masks.map(|m| m.seed())
        )));
    }
    if let Some(m) = masks {
        m.check_matches(spec)?;
    }
    if selected.is_empty() {
        return Err(Error::Config(
            "selected subset is empty; the update is undefined".into(),
        ));
    }
    let rows = trace.batch_rows();
    for pair in selected.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::Config(format!(
                "selected indices must be strictly increasing, got {:?}",
                selected
            )));
        }
    }
    if *selected.last().expect("nonempty") >= rows {
        return Err(Error::Config(format!(
            "selected index {} out of range for batch of {rows}",
            selected.last().expect("nonempty")
        )));
    }
    for i in spec.parameterized_layers() {
        if params.get(i).is_none() {
            return Err(Error::Config(format!("parameters missing for layer {i}")));
        }
    }
    (0..=spec.layers().len())
        .map(|i| trace.activation(i).gather_rows(selected))
        .collect()
}

/// Gradient of the mean (over `selected`) cross-entropy loss.
///
/// `labels` are indexed by batch row (the full mini-batch labels);
/// `selected` lists the rows participating in the update, strictly
/// increasing.
pub fn backward(
    spec: &NetworkSpec,
    params: &Parameters,
    trace: &ActivationTrace,
    labels: &[usize],
    masks: Option<&DropoutMaskSet>,
    selected: &[usize],
) -> Result<GradientBuffer> {
    if labels.len() != trace.batch_rows() {
        return Err(Error::Config(format!(
            "{} labels for a batch of {} rows",
            labels.len(),
            trace.batch_rows()
        )));
    }
    let gathered = gather_and_check(spec, params, trace, masks, selected)?;
    let logits = gathered.last().expect("trace nonempty");
    let classes = spec.class_count();
    let k = selected.len();

    // ∂(mean CE)/∂logits = (softmax − onehot) / k, row per selected sample.
    let mut d_logits = softmax_rows(logits)?;
    for (r, &row_idx) in selected.iter().enumerate() {
        let label = labels[row_idx];
        if label >= classes {
            return Err(Error::LabelRange {
                sample: row_idx,
                label,
                class_count: classes,
            });
        }
        let row = d_logits.row_mut(r);
        row[label] -= 1.0;
        for v in row.iter_mut() {
            *v /= k as f64;
        }
    }
    propagate(spec, params, &gathered, d_logits, masks)
}

/// Backward pass from a caller-supplied `∂loss/∂logits` over the selected
/// rows (`d_logits` has one row per entry of `selected`, already including
/// any 1/k averaging).
pub fn backward_from_logit_grad(
    spec: &NetworkSpec,
    params: &Parameters,
    trace: &ActivationTrace,
    d_logits: Tensor,
    masks: Option<&DropoutMaskSet>,
    selected: &[usize],
) -> Result<GradientBuffer> {
    let gathered = gather_and_check(spec, params, trace, masks, selected)?;
    if d_logits.shape() != [selected.len(), spec.class_count()] {
        return Err(Error::Config(format!(
            "d_logits shape {:?}, expected [{}, {}]",
            d_logits.shape(),
            selected.len(),
            spec.class_count()
        )));
    }
    propagate(spec, params, &gathered, d_logits, masks)
}

/// Layer-by-layer reverse sweep. `gathered[i]` is the (selected-rows)
/// input of layer `i`; `d_out` enters as ∂loss/∂logits and leaves each
/// iteration as ∂loss/∂(layer input).
fn propagate(
    spec: &NetworkSpec,
    params: &Parameters,
    gathered: &[Tensor],
    mut d_out: Tensor,
    masks: Option<&DropoutMaskSet>,
) -> Result<GradientBuffer> {
    let mut grads = params.zeros_like();
    for i in (0..spec.layers().len()).rev() {
        let input = &gathered[i];
        let output = &gathered[i + 1];
        let rows = input.rows();
        let need_d_input = i > 0;
        d_out = match &spec.layers()[i] {
            LayerSpec::Dense { width } => {
                let lp = params.get(i).expect("validated");
                let g = grads.get_mut(i).expect("congruent with params");
                let in_w = spec.width_before(i);
                // Behind an active dropout site the input is exactly zero on
                // dropped columns, so both gradient products are computed on
                // the kept columns only. dx for dropped columns is left at
                // zero — the same value the adjacent dropout backward (the
                // only consumer) would assign it.
                let kept = super::forward::masked_dense_kept(spec, i, masks, Mode::Train);
                if let Some(kept) = &kept {
                    let xk = kernels::gather_cols(input.data(), in_w, kept);
                    let mut dwk = vec![0.0; *width * kept.len()];
                    kernels::dense_backward_params(
                        &xk,
                        d_out.data(),
                        &mut dwk,
                        g.bias.data_mut(),
                        kept.len(),
                        *width,
                    );
                    kernels::scatter_cols_add(&dwk, g.weight.data_mut(), in_w, kept);
                } else {
                    kernels::dense_backward_params(
                        input.data(),
                        d_out.data(),
                        g.weight.data_mut(),
                        g.bias.data_mut(),
                        in_w,
                        *width,
                    );
                }
                if need_d_input {
                    let mut dx = Tensor::zeros(input.shape().to_vec());
                    if let Some(kept) = &kept {
                        let wk = kernels::gather_cols(lp.weight.data(), in_w, kept);
                        let mut dxk = vec![0.0; rows * kept.len()];
                        kernels::dense_backward_input(
                            d_out.data(),
                            &wk,
                            &mut dxk,
                            kept.len(),
                            *width,
                        );
                        kernels::scatter_cols_add(&dxk, dx.data_mut(), in_w, kept);
                    } else {
                        kernels::dense_backward_input(
                            d_out.data(),
                            lp.weight.data(),
                            dx.data_mut(),
                            in_w,
                            *width,
                        );
                    }
                    dx
                } else {
                    break;
                }
            }
            LayerSpec::Conv2d {
                channels,
                kernel,
                stride,
            } => {
                let lp = params.get(i).expect("validated");
                let g = grads.get_mut(i).expect("congruent with params");
                let s = spec.shape_before(i);
                let dims = (s[0], s[1], s[2]);
                let conv = (*channels, *kernel, *stride);
                kernels::conv2d_backward_params(
                    input.data(),
                    d_out.data(),
                    g.weight.data_mut(),
                    g.bias.data_mut(),
                    dims,
                    conv,
                );
                if need_d_input {
                    let mut dx = Tensor::zeros(input.shape().to_vec());
                    kernels::conv2d_backward_input(
                        d_out.data(),
                        lp.weight.data(),
                        dx.data_mut(),
                        dims,
                        conv,
                    );
                    dx
                } else {
                    break;
                }
            }
            LayerSpec::MaxPool2x2 => {
                let s = spec.shape_before(i);
                let mut dx = Tensor::zeros(input.shape().to_vec());
                kernels::maxpool_backward(
                    input.data(),
                    d_out.data(),
                    dx.data_mut(),
                    (s[0], s[1], s[2]),
                );
                dx
            }
            LayerSpec::Relu => {
                // Gate on the traced output: y > 0 iff the unit was active.
                let mut dx = d_out;
                for (d, &y) in dx.data_mut().iter_mut().zip(output.data()) {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                }
                dx
            }
            LayerSpec::Softsign => {
                // y = x/(1+|x|) ⇒ dy/dx = 1/(1+|x|)² = (1−|y|)².
                let mut dx = d_out;
                for (d, &y) in dx.data_mut().iter_mut().zip(output.data()) {
                    let g = 1.0 - y.abs();
                    *d *= g * g;
                }
                dx
            }
            LayerSpec::Dropout { p } => {
                let mask = masks
                    .expect("train trace with dropout sites implies masks")
                    .site(i)
                    .expect("mask sites validated");
                let scale = 1.0 / (1.0 - p);
                let width = input.row_len();
                let mut dx = d_out;
                debug_assert_eq!(dx.rows(), rows);
                for row in dx.data_mut().chunks_exact_mut(width) {
                    for (d, &keep) in row.iter_mut().zip(mask) {
                        *d = if keep { *d * scale } else { 0.0 };
                    }
                }
                dx
            }
        };
    }
    Ok(grads)
}
