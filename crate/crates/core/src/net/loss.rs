//! Classification losses over logits.
//!
//! Everything works on `[batch, class_count]` logit tensors. Softmax is
//! stabilized by max-subtraction, so logits with magnitude up to about 1e3
//! cause no overflow; cross-entropy values are clamped at [`LOSS_CLAMP`]
//! (1e3) so loss-based selection always ranks finite numbers.

use crate::error::{Error, Result};
use crate::net::LOSS_CLAMP;
use crate::tensor::Tensor;

/// Log-softmax of each row, written into a new tensor of the same shape.
///
/// `out[b, c] = z[b, c] − max_c z[b, ·] − ln Σ exp(z[b, ·] − max)`.
pub fn log_softmax_rows(logits: &Tensor) -> Result<Tensor> {
    if logits.shape().len() != 2 {
        return Err(Error::Config(format!(
            "expected [batch, classes] logits, got shape {:?}",
            logits.shape()
        )));
    }
    let mut out = Tensor::zeros(logits.shape().to_vec());
    let width = logits.row_len();
    for (row, out_row) in logits
        .data()
        .chunks_exact(width)
        .zip(out.data_mut().chunks_exact_mut(width))
    {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NonFinite {
                context: "logits entering softmax".into(),
            });
        }
        let mut sum = 0.0;
        for (o, z) in out_row.iter_mut().zip(row) {
            *o = z - max;
            sum += o.exp();
        }
        let log_sum = sum.ln();
        for o in out_row.iter_mut() {
            *o -= log_sum;
        }
    }
    Ok(out)
}

/// Softmax probabilities of each row.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let mut out = log_softmax_rows(logits)?;
    for v in out.data_mut() {
        *v = v.exp();
    }
    Ok(out)
}

/// Per-sample cross-entropy `−log softmax(z)[label]`, clamped at 1e3.
pub fn cross_entropy_per_sample(logits: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
    let classes = logits.row_len();
    if logits.rows() != labels.len() {
        return Err(Error::Config(format!(
            "{} logit rows vs {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let log_probs = log_softmax_rows(logits)?;
    let mut losses = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelRange {
                sample: i,
                label,
                class_count: classes,
            });
        }
        losses.push((-log_probs.row(i)[label]).min(LOSS_CLAMP));
    }
    Ok(losses)
}

/// Per-sample `KL(softmax(p) ‖ softmax(q))`.
///
/// Computed as `Σ_c exp(lp_c)·(lp_c − lq_c)` over log-probabilities, which
/// is exactly zero when the two logit rows are equal.
pub fn kl_div_per_sample(p_logits: &Tensor, q_logits: &Tensor) -> Result<Vec<f64>> {
    if p_logits.shape() != q_logits.shape() {
        return Err(Error::Config(format!(
            "KL shape mismatch: {:?} vs {:?}",
            p_logits.shape(),
            q_logits.shape()
        )));
    }
    let lp = log_softmax_rows(p_logits)?;
    let lq = log_softmax_rows(q_logits)?;
    let width = p_logits.row_len();
    let mut out = Vec::with_capacity(p_logits.rows());
    for (lp_row, lq_row) in lp
        .data()
        .chunks_exact(width)
        .zip(lq.data().chunks_exact(width))
    {
        let mut kl = 0.0;
        for (a, b) in lp_row.iter().zip(lq_row) {
            kl += a.exp() * (a - b);
        }
        out.push(kl.min(LOSS_CLAMP));
    }
    Ok(out)
}

/// Row-wise argmax; ties broken by the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let width = logits.row_len();
    logits
        .data()
        .chunks_exact(width)
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(vec![rows, cols], data).unwrap()
    }

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = tensor(3, 10, vec![0.7; 30]);
        let losses = cross_entropy_per_sample(&logits, &[0, 5, 9]).unwrap();
        for l in losses {
            assert!((l - 10.0f64.ln()).abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn confident_correct_logit_loss() {
        // logits [10, 0], label 0 → ln(1 + e^−10).
        let losses = cross_entropy_per_sample(&tensor(1, 2, vec![10.0, 0.0]), &[0]).unwrap();
        let expect = (1.0 + (-10.0f64).exp()).ln();
        assert!((losses[0] - expect).abs() < 1e-15, "{}", losses[0]);
        assert!((losses[0] - 4.5398e-5).abs() < 1e-9);
    }

    #[test]
    fn symmetric_two_class_loss_is_ln_2() {
        let losses = cross_entropy_per_sample(&tensor(1, 2, vec![0.0, 0.0]), &[1]).unwrap();
        assert!((losses[0] - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_label_names_sample() {
        let err = cross_entropy_per_sample(&tensor(2, 3, vec![0.0; 6]), &[1, 3]).unwrap_err();
        match err {
            Error::LabelRange { sample, label, .. } => {
                assert_eq!((sample, label), (1, 3));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn extreme_logits_stay_finite_and_clamped() {
        let losses =
            cross_entropy_per_sample(&tensor(1, 2, vec![1000.0, -1000.0]), &[1]).unwrap();
        assert_eq!(losses[0], 1e3, "wrong-way 2000-gap loss clamps at 1e3");
        let ok = cross_entropy_per_sample(&tensor(1, 2, vec![1000.0, -1000.0]), &[0]).unwrap();
        assert_eq!(ok[0], 0.0, "right-way prediction has ~0 loss");
    }

    #[test]
    fn kl_matches_hand_value_and_is_asymmetric() {
        // p = [0.8, 0.2], q = [0.5, 0.5] as log-probability logits.
        let p = tensor(1, 2, vec![0.8f64.ln(), 0.2f64.ln()]);
        let q = tensor(1, 2, vec![0.5f64.ln(), 0.5f64.ln()]);
        let forward = kl_div_per_sample(&p, &q).unwrap()[0];
        let reverse = kl_div_per_sample(&q, &p).unwrap()[0];
        let expect_fwd = 0.8 * (1.6f64).ln() + 0.2 * (0.4f64).ln();
        let expect_rev = 0.5 * (0.5f64 / 0.8).ln() + 0.5 * (0.5f64 / 0.2).ln();
        assert!((forward - expect_fwd).abs() < 1e-12);
        assert!((forward - 0.192745).abs() < 1e-6);
        assert!((reverse - expect_rev).abs() < 1e-12);
        assert!((reverse - 0.223144).abs() < 1e-6);
        assert!(forward != reverse);
    }

    #[test]
    fn kl_of_identical_logits_is_exactly_zero() {
        let p = tensor(2, 4, vec![0.3, -1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(kl_div_per_sample(&p, &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn kl_nonnegative_on_random_rows() {
        let mut rng = crate::rng::SplitMix64::new(3);
        for _ in 0..100 {
            let p = tensor(1, 5, (0..5).map(|_| rng.next_gaussian() * 3.0).collect());
            let q = tensor(1, 5, (0..5).map(|_| rng.next_gaussian() * 3.0).collect());
            let kl = kl_div_per_sample(&p, &q).unwrap()[0];
            assert!(kl >= 0.0, "negative KL {kl}");
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let logits = tensor(2, 3, vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(argmax_rows(&logits), vec![0, 1]);
    }
}
