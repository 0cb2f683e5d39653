//! Two-network reference algorithms: co-teaching, co-teaching+, and JoCoR.
//!
//! Both networks share the (unwidened) architecture but carry independent
//! parameters and optimizer states. Per batch:
//!
//! * **co-teaching** — each net picks its small-loss subset; the *other*
//!   net trains on it (cross-update). Both gradients are taken from the
//!   pre-step parameters, then both steps apply.
//! * **co-teaching+** — the same cross-update, but selection is restricted
//!   to the samples the two nets currently disagree on (falling back to the
//!   whole batch when they agree everywhere).
//! * **JoCoR** — a single shared per-sample joint loss (CE of both nets
//!   plus symmetric KL between them) is jointly selected, and both nets
//!   descend it.

use crate::error::{Error, Result};
use crate::net::{
    argmax_rows, backward, backward_from_logit_grad, cross_entropy_per_sample, forward,
    optimizer_step, Mode, NetworkSpec,
};
use crate::selection::{disagreement_filter, select_small_loss, SelectedBatch};
use crate::trainers::ours::JointLoss;
use crate::trainers::{
    at_batch, epoch_batches, train_epoch_plain, Algorithm, EpochStats, ModelState, TrainerConfig,
};

/// One epoch of a two-network algorithm (per `cfg.algorithm`).
pub fn train_epoch_two_model(
    spec: &NetworkSpec,
    model_a: &mut ModelState,
    model_b: &mut ModelState,
    data: &crate::data::NoisyDataset,
    cfg: &TrainerConfig,
    epoch: usize,
) -> Result<EpochStats> {
    if !cfg.algorithm.is_two_model() {
        return Err(Error::Config(format!(
            "two-model epoch invoked for {}",
            cfg.algorithm
        )));
    }
    if cfg.in_warmup(epoch) {
        // Warm-up: both nets do independent full-batch CE over the same
        // batch order.
        let mut stats = train_epoch_plain(
            spec,
            &mut model_a.params,
            &mut model_a.optimizer,
            data,
            cfg,
            epoch,
        )?;
        let more = train_epoch_plain(
            spec,
            &mut model_b.params,
            &mut model_b.optimizer,
            data,
            cfg,
            epoch,
        )?;
        stats.add(more.loss_sum, more.selected, more.examples, more.clean_selected);
        return Ok(stats);
    }
    let rate = cfg.schedule()?.remember_rate(epoch);

    let mut stats = EpochStats::default();
    for (b, batch) in epoch_batches(data, cfg, epoch)?.enumerate() {
        (|| -> Result<()> {
            let labels = &batch.noisy_labels;
            let trace_a = forward(spec, &model_a.params, &batch.features, None, Mode::Train)?;
            let trace_b = forward(spec, &model_b.params, &batch.features, None, Mode::Train)?;

            match cfg.algorithm {
                Algorithm::Coteaching | Algorithm::CoteachingPlus => {
                    let ce_a = cross_entropy_per_sample(trace_a.logits(), labels)?;
                    let ce_b = cross_entropy_per_sample(trace_b.logits(), labels)?;

                    // Co-teaching+ restricts selection to the disagreement
                    // set; plain co-teaching always uses the whole batch.
                    let pool = if cfg.algorithm == Algorithm::CoteachingPlus {
                        disagreement_filter(
                            &argmax_rows(trace_a.logits()),
                            &argmax_rows(trace_b.logits()),
                        )?
                    } else {
                        Vec::new()
                    };
                    let select_by = |losses: &[f64]| -> Result<SelectedBatch> {
                        if pool.is_empty() {
                            select_small_loss(losses, rate)
                        } else {
                            let pool_losses: Vec<f64> =
                                pool.iter().map(|&i| losses[i]).collect();
                            select_small_loss(&pool_losses, rate)?
                                .map_through_pool(&pool, batch.len())
                        }
                    };
                    let mut sel_a = select_by(&ce_a)?;
                    let mut sel_b = select_by(&ce_b)?;
                    sel_a.tally_clean(&batch.flip_mask)?;
                    sel_b.tally_clean(&batch.flip_mask)?;

                    // Cross-update from pre-step parameters: A trains on
                    // B's picks and vice versa.
                    let grads_a =
                        backward(spec, &model_a.params, &trace_a, labels, None, sel_b.indices())?;
                    let grads_b =
                        backward(spec, &model_b.params, &trace_b, labels, None, sel_a.indices())?;
                    optimizer_step(&mut model_a.params, &grads_a, &mut model_a.optimizer)?;
                    optimizer_step(&mut model_b.params, &grads_b, &mut model_b.optimizer)?;

                    let loss_sum = sel_b.indices().iter().map(|&i| ce_a[i]).sum::<f64>()
                        + sel_a.indices().iter().map(|&i| ce_b[i]).sum::<f64>();
                    stats.add(
                        loss_sum,
                        sel_a.len() + sel_b.len(),
                        2 * batch.len(),
                        sel_a.clean_count().expect("tallied")
                            + sel_b.clean_count().expect("tallied"),
                    );
                }
                Algorithm::Jocor => {
                    let joint = JointLoss::compute(
                        trace_a.logits(),
                        trace_b.logits(),
                        labels,
                        cfg.jocor_weight,
                    )?;
                    let mut sel = select_small_loss(&joint.per_sample, rate)?;
                    sel.tally_clean(&batch.flip_mask)?;

                    let d_a = joint.d_logits_first(labels, sel.indices());
                    let d_b = joint.d_logits_second(labels, sel.indices());
                    let grads_a = backward_from_logit_grad(
                        spec,
                        &model_a.params,
                        &trace_a,
                        d_a,
                        None,
                        sel.indices(),
                    )?;
                    let grads_b = backward_from_logit_grad(
                        spec,
                        &model_b.params,
                        &trace_b,
                        d_b,
                        None,
                        sel.indices(),
                    )?;
                    optimizer_step(&mut model_a.params, &grads_a, &mut model_a.optimizer)?;
                    optimizer_step(&mut model_b.params, &grads_b, &mut model_b.optimizer)?;

                    stats.add(
                        sel.losses().iter().sum(),
                        sel.len(),
                        batch.len(),
                        sel.clean_count().expect("tallied"),
                    );
                }
                other => {
                    return Err(Error::Config(format!("two-model epoch invoked for {other}")))
                }
            }
            Ok(())
        })()
        .map_err(|e| at_batch(e, epoch, b))?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_blobs, NoisyDataset};
    use crate::net::{init_parameters, presets, OptimRule, OptimizerState, Parameters};

    fn config(algorithm: Algorithm, tau: f64) -> TrainerConfig {
        let mut cfg = TrainerConfig::new(algorithm, 606);
        cfg.batch_size = 8;
        cfg.max_epochs = 30;
        cfg.ramp_epochs = 3;
        cfg.warmup_epochs = 0;
        cfg.tau = tau;
        cfg.dropout_p = 0.0;
        cfg
    }

    fn blob_data() -> NoisyDataset {
        synthetic_blobs(2, 16, 3, 4.0, 77, false).unwrap()
    }

    fn model(params: &Parameters, lr: f64) -> ModelState {
        ModelState {
            params: params.clone(),
            optimizer: OptimizerState::new(OptimRule::default_adaptive(), lr, params).unwrap(),
        }
    }

    fn assert_params_eq(a: &Parameters, b: &Parameters) {
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            assert_eq!(x.weight.data(), y.weight.data());
            assert_eq!(x.bias.data(), y.bias.data());
        }
    }

    /// τ = 0 keeps the rate at 1, so both nets train on every sample and
    /// co-teaching with identical initialization is plain CE training.
    #[test]
    fn coteaching_at_rate_one_is_plain_ce() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let init = init_parameters(&spec, 13);
        let data = blob_data();
        let cfg = config(Algorithm::Coteaching, 0.0);

        let mut a = model(&init, 1e-3);
        let mut b = model(&init, 1e-3);
        let mut plain = model(&init, 1e-3);
        for epoch in 0..3 {
            train_epoch_two_model(&spec, &mut a, &mut b, &data, &cfg, epoch).unwrap();
            train_epoch_plain(
                &spec,
                &mut plain.params,
                &mut plain.optimizer,
                &data,
                &cfg,
                epoch,
            )
            .unwrap();
        }
        assert_params_eq(&a.params, &plain.params);
        assert_params_eq(&b.params, &plain.params);
    }

    /// Identical nets always agree, so co-teaching+ exercises the
    /// whole-batch fallback every batch — which, with identical losses,
    /// coincides with each net training on its own small-loss picks.
    #[test]
    fn coteaching_plus_identical_nets_use_the_fallback() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let init = init_parameters(&spec, 29);
        let matrix =
            crate::data::build_transition_matrix(crate::data::NoiseKind::Symmetric, 0.3, 2)
                .unwrap();
        let data = blob_data().with_noise(&matrix, 5).unwrap();
        let cfg = config(Algorithm::CoteachingPlus, 0.3);

        let mut a = model(&init, 1e-3);
        let mut b = model(&init, 1e-3);
        let mut self_paced = model(&init, 1e-3);
        let mut cfg_sp = cfg.clone();
        cfg_sp.algorithm = Algorithm::MentornetOurs;
        for epoch in 0..4 {
            train_epoch_two_model(&spec, &mut a, &mut b, &data, &cfg, epoch).unwrap();
            crate::trainers::train_epoch_small_loss(
                &spec,
                &mut self_paced.params,
                &mut self_paced.optimizer,
                &data,
                &cfg_sp,
                epoch,
            )
            .unwrap();
        }
        assert_params_eq(&a.params, &b.params);
        assert_params_eq(&a.params, &self_paced.params);
    }

    /// With λ_w = 0 and rate 1 the joint loss decouples: JoCoR equals two
    /// independent CE trainings over the same batch order, bit for bit.
    #[test]
    fn jocor_lambda_zero_is_two_independent_ce_trainings() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let init_a = init_parameters(&spec, 41);
        let init_b = init_parameters(&spec, 42);
        let data = blob_data();
        let mut cfg = config(Algorithm::Jocor, 0.0);
        cfg.jocor_weight = 0.0;

        let mut a = model(&init_a, 1e-3);
        let mut b = model(&init_b, 1e-3);
        let mut solo_a = model(&init_a, 1e-3);
        let mut solo_b = model(&init_b, 1e-3);
        for epoch in 0..3 {
            train_epoch_two_model(&spec, &mut a, &mut b, &data, &cfg, epoch).unwrap();
            for solo in [&mut solo_a, &mut solo_b] {
                train_epoch_plain(&spec, &mut solo.params, &mut solo.optimizer, &data, &cfg, epoch)
                    .unwrap();
            }
        }
        assert_params_eq(&a.params, &solo_a.params);
        assert_params_eq(&b.params, &solo_b.params);
    }

    #[test]
    fn warmup_trains_both_nets_on_everything() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let data = blob_data();
        let mut cfg = config(Algorithm::Coteaching, 0.5);
        cfg.warmup_epochs = 2;
        let mut a = model(&init_parameters(&spec, 1), 1e-3);
        let mut b = model(&init_parameters(&spec, 2), 1e-3);
        let stats = train_epoch_two_model(&spec, &mut a, &mut b, &data, &cfg, 0).unwrap();
        assert_eq!(stats.selected, 2 * data.len());
        assert_eq!(stats.examples, 2 * data.len());
    }

    #[test]
    fn two_model_epoch_rejects_single_model_algorithms() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let mut a = model(&init_parameters(&spec, 1), 1e-3);
        let mut b = model(&init_parameters(&spec, 2), 1e-3);
        let cfg = config(Algorithm::BaselineCe, 0.0);
        let err =
            train_epoch_two_model(&spec, &mut a, &mut b, &blob_data(), &cfg, 0).unwrap_err();
        assert_eq!(err.class(), "config");
    }
}
