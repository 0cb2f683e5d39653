//! Instance-pair epoch loop: the single-network replacements for
//! co-teaching+ and JoCoR.
//!
//! Per mini-batch, two dropout mask sets are sampled from the same widened
//! network. Instance 1 is forwarded with its full activation trace kept —
//! gradients flow only through it. Instance 2 is re-forwarded logits-only
//! and acts as the peer: its outputs drive selection (and, for the JoCoR
//! variant, enter the joint loss as constants). The selected subset's mean
//! loss is then backpropagated through instance 1 and one optimizer step is
//! taken.

use crate::data::MiniBatch;
use crate::error::{Error, Result};
use crate::net::{
    argmax_rows, backward, backward_from_logit_grad, cross_entropy_per_sample, forward,
    forward_logits, kl_div_per_sample, log_softmax_rows, optimizer_step, softmax_rows, Mode,
    NetworkSpec, OptimizerState, Parameters,
};
use crate::selection::{disagreement_filter, select_small_loss};
use crate::tensor::Tensor;
use crate::trainers::{
    at_batch, batch_masks, epoch_batches, train_epoch_plain, Algorithm, EpochStats, TrainerConfig,
};
use crate::DropoutMaskSet;

/// One epoch of instance-pair training (`coteaching_plus_ours` or
/// `jocor_ours`, per `cfg.algorithm`).
pub fn train_epoch_instance_pair(
    spec: &NetworkSpec,
    params: &mut Parameters,
    optimizer: &mut OptimizerState,
    data: &crate::data::NoisyDataset,
    cfg: &TrainerConfig,
    epoch: usize,
) -> Result<EpochStats> {
    if !matches!(
        cfg.algorithm,
        Algorithm::CoteachingPlusOurs | Algorithm::JocorOurs
    ) {
        return Err(Error::Config(format!(
            "instance-pair epoch invoked for {}",
            cfg.algorithm
        )));
    }
    if cfg.in_warmup(epoch) {
        return train_epoch_plain(spec, params, optimizer, data, cfg, epoch);
    }
    let rate = cfg.schedule()?.remember_rate(epoch);

    let mut stats = EpochStats::default();
    for (b, batch) in epoch_batches(data, cfg, epoch)?.enumerate() {
        (|| -> Result<()> {
            let masks1 = batch_masks(spec, cfg.seed, epoch, b, 1)?;
            let masks2 = batch_masks(spec, cfg.seed, epoch, b, 2)?;
            let outcome = instance_pair_step(
                spec,
                params,
                optimizer,
                &batch,
                cfg,
                rate,
                masks1.as_ref(),
                masks2.as_ref(),
            )?;
            stats.add(outcome.loss_sum, outcome.selected, batch.len(), outcome.clean);
            Ok(())
        })()
        .map_err(|e| at_batch(e, epoch, b))?;
    }
    Ok(stats)
}

pub(crate) struct StepOutcome {
    pub loss_sum: f64,
    pub selected: usize,
    pub clean: usize,
}

/// One mini-batch update. Factored out so the selection/update split can be
/// tested with explicit mask sets.
#[allow(clippy::too_many_arguments)]
pub(crate) fn instance_pair_step(
    spec: &NetworkSpec,
    params: &mut Parameters,
    optimizer: &mut OptimizerState,
    batch: &MiniBatch,
    cfg: &TrainerConfig,
    rate: f64,
    masks1: Option<&DropoutMaskSet>,
    masks2: Option<&DropoutMaskSet>,
) -> Result<StepOutcome> {
    let labels = &batch.noisy_labels;
    let trace1 = forward(spec, params, &batch.features, masks1, Mode::Train)?;
    let logits2 = forward_logits(spec, params, &batch.features, masks2, Mode::Train)?;

    match cfg.algorithm {
        Algorithm::CoteachingPlusOurs => {
            // Peer losses and the prediction-disagreement pool.
            let losses2 = cross_entropy_per_sample(&logits2, labels)?;
            let preds1 = argmax_rows(trace1.logits());
            let preds2 = argmax_rows(&logits2);
            let pool = disagreement_filter(&preds1, &preds2)?;

            let mut sel = if pool.is_empty() {
                // The instances agree everywhere (e.g. early training or
                // p = 0): fall back to small-loss over the whole batch.
                select_small_loss(&losses2, rate)?
            } else {
                let pool_losses: Vec<f64> = pool.iter().map(|&i| losses2[i]).collect();
                select_small_loss(&pool_losses, rate)?.map_through_pool(&pool, batch.len())?
            };
            sel.tally_clean(&batch.flip_mask)?;

            // The optimized objective is instance 1's mean CE on the
            // selected subset; report that as the train loss.
            let losses1 = cross_entropy_per_sample(trace1.logits(), labels)?;
            let loss_sum = sel.indices().iter().map(|&i| losses1[i]).sum();

            let grads = backward(spec, params, &trace1, labels, masks1, sel.indices())?;
            optimizer_step(params, &grads, optimizer)?;
            Ok(StepOutcome {
                loss_sum,
                selected: sel.len(),
                clean: sel.clean_count().expect("tallied above"),
            })
        }
        Algorithm::JocorOurs => {
            let joint = JointLoss::compute(trace1.logits(), &logits2, labels, cfg.jocor_weight)?;
            let mut sel = select_small_loss(&joint.per_sample, rate)?;
            sel.tally_clean(&batch.flip_mask)?;
            let loss_sum = sel.losses().iter().sum();

            // Only instance 1 is differentiated; instance 2's outputs are
            // constants inside the joint loss.
            let d_logits = joint.d_logits_first(labels, sel.indices());
            let grads =
                backward_from_logit_grad(spec, params, &trace1, d_logits, masks1, sel.indices())?;
            optimizer_step(params, &grads, optimizer)?;
            Ok(StepOutcome {
                loss_sum,
                selected: sel.len(),
                clean: sel.clean_count().expect("tallied above"),
            })
        }
        other => Err(Error::Config(format!(
            "instance-pair step invoked for {other}"
        ))),
    }
}

/// The JoCoR per-sample joint loss and its logit gradients:
///
/// ```text
/// ℓ_i = (1−λ)·(CE(z¹_i) + CE(z²_i)) + λ·(KL(p¹_i ‖ p²_i) + KL(p²_i ‖ p¹_i))
/// ```
///
/// Values use the same clamped CE/KL as everywhere else (stable selection
/// ranking); gradients come from the unclamped expressions.
pub(crate) struct JointLoss {
    pub per_sample: Vec<f64>,
    lambda: f64,
    sm_first: Tensor,
    sm_second: Tensor,
    lp_first: Tensor,
    lp_second: Tensor,
}

impl JointLoss {
    pub(crate) fn compute(
        logits_first: &Tensor,
        logits_second: &Tensor,
        labels: &[usize],
        lambda: f64,
    ) -> Result<JointLoss> {
        let ce1 = cross_entropy_per_sample(logits_first, labels)?;
        let ce2 = cross_entropy_per_sample(logits_second, labels)?;
        let kl12 = kl_div_per_sample(logits_first, logits_second)?;
        let kl21 = kl_div_per_sample(logits_second, logits_first)?;
        let per_sample = (0..labels.len())
            .map(|i| (1.0 - lambda) * (ce1[i] + ce2[i]) + lambda * (kl12[i] + kl21[i]))
            .collect();
        Ok(JointLoss {
            per_sample,
            lambda,
            sm_first: softmax_rows(logits_first)?,
            sm_second: softmax_rows(logits_second)?,
            lp_first: log_softmax_rows(logits_first)?,
            lp_second: log_softmax_rows(logits_second)?,
        })
    }

    /// ∂(mean selected joint loss)/∂z for the *first* logit set, holding
    /// the second fixed:
    ///
    /// ```text
    /// (1−λ)(p¹−y) + λ·( p¹ ⊙ (log p¹ − log p² − KL(p¹‖p²)) + (p¹−p²) ) , all / k
    /// ```
    pub(crate) fn d_logits_first(&self, labels: &[usize], selected: &[usize]) -> Tensor {
        self.d_logits(
            labels, selected, &self.sm_first, &self.sm_second, &self.lp_first, &self.lp_second,
        )
    }

    /// The mirror image: gradient for the *second* logit set, holding the
    /// first fixed (used by the two-network JoCoR, where both sides train).
    pub(crate) fn d_logits_second(&self, labels: &[usize], selected: &[usize]) -> Tensor {
        self.d_logits(
            labels, selected, &self.sm_second, &self.sm_first, &self.lp_second, &self.lp_first,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn d_logits(
        &self,
        labels: &[usize],
        selected: &[usize],
        sm_own: &Tensor,
        sm_peer: &Tensor,
        lp_own: &Tensor,
        lp_peer: &Tensor,
    ) -> Tensor {
        let classes = sm_own.row_len();
        let k = selected.len() as f64;
        let lambda = self.lambda;
        let mut d = Tensor::zeros(vec![selected.len(), classes]);
        for (r, &i) in selected.iter().enumerate() {
            let s = sm_own.row(i);
            let t = sm_peer.row(i);
            let lo = lp_own.row(i);
            let lq = lp_peer.row(i);
            // Unclamped KL(own ‖ peer) for this sample, fixed class order.
            let mut kl = 0.0;
            for c in 0..classes {
                kl += s[c] * (lo[c] - lq[c]);
            }
            let row = d.row_mut(r);
            for c in 0..classes {
                let y = if labels[i] == c { 1.0 } else { 0.0 };
                let mut g = (1.0 - lambda) * (s[c] - y);
                g += lambda * (s[c] * (lo[c] - lq[c] - kl) + (s[c] - t[c]));
                row[c] = g / k;
            }
        }
        d
    }
}

/// Convenience used by tests: run selection exactly the way the
/// co-teaching+ step does, returning the selected batch.
#[cfg(test)]
fn cpo_selection(
    losses2: &[f64],
    preds1: &[usize],
    preds2: &[usize],
    rate: f64,
    batch_len: usize,
) -> Result<crate::selection::SelectedBatch> {
    let pool = disagreement_filter(preds1, preds2)?;
    if pool.is_empty() {
        select_small_loss(losses2, rate)
    } else {
        let pool_losses: Vec<f64> = pool.iter().map(|&i| losses2[i]).collect();
        select_small_loss(&pool_losses, rate)?.map_through_pool(&pool, batch_len)
    }
}
