//! Single-model epoch loops without an instance pair: plain full-batch
//! cross-entropy (`baseline_ce`, `dropout_only`) and self-paced small-loss
//! selection on a single instance's own losses (`mentornet_ours`).

use crate::data::NoisyDataset;
use crate::error::Result;
use crate::net::{
    backward, cross_entropy_per_sample, forward, optimizer_step, Mode, NetworkSpec,
    OptimizerState, Parameters,
};
use crate::selection::select_small_loss;
use crate::trainers::{
    at_batch, batch_masks, clean_total, epoch_batches, EpochStats, TrainerConfig,
};

/// One epoch of full-batch cross-entropy. Specs with dropout sites train
/// through one sampled instance per batch; specs without train unmasked.
pub fn train_epoch_plain(
    spec: &NetworkSpec,
    params: &mut Parameters,
    optimizer: &mut OptimizerState,
    data: &NoisyDataset,
    cfg: &TrainerConfig,
    epoch: usize,
) -> Result<EpochStats> {
    let mut stats = EpochStats::default();
    for (b, batch) in epoch_batches(data, cfg, epoch)?.enumerate() {
        (|| -> Result<()> {
            let masks = batch_masks(spec, cfg.seed, epoch, b, 1)?;
            let trace = forward(spec, params, &batch.features, masks.as_ref(), Mode::Train)?;
            let losses = cross_entropy_per_sample(trace.logits(), &batch.noisy_labels)?;
            let all: Vec<usize> = (0..batch.len()).collect();
            let grads = backward(
                spec,
                params,
                &trace,
                &batch.noisy_labels,
                masks.as_ref(),
                &all,
            )?;
            optimizer_step(params, &grads, optimizer)?;
            stats.add(
                losses.iter().sum(),
                batch.len(),
                batch.len(),
                clean_total(&batch.flip_mask),
            );
            Ok(())
        })()
        .map_err(|e| at_batch(e, epoch, b))?;
    }
    Ok(stats)
}

/// One epoch of self-paced small-loss training: a single instance per
/// batch, selection at the remember rate on that same instance's losses,
/// update through that same instance.
pub fn train_epoch_small_loss(
    spec: &NetworkSpec,
    params: &mut Parameters,
    optimizer: &mut OptimizerState,
    data: &NoisyDataset,
    cfg: &TrainerConfig,
    epoch: usize,
) -> Result<EpochStats> {
    if cfg.in_warmup(epoch) {
        return train_epoch_plain(spec, params, optimizer, data, cfg, epoch);
    }
    let schedule = cfg.schedule()?;
    let rate = schedule.remember_rate(epoch);

    let mut stats = EpochStats::default();
    for (b, batch) in epoch_batches(data, cfg, epoch)?.enumerate() {
        (|| -> Result<()> {
            let masks = batch_masks(spec, cfg.seed, epoch, b, 1)?;
            let trace = forward(spec, params, &batch.features, masks.as_ref(), Mode::Train)?;
            let losses = cross_entropy_per_sample(trace.logits(), &batch.noisy_labels)?;

            let mut sel = select_small_loss(&losses, rate)?;
            sel.tally_clean(&batch.flip_mask)?;

            let grads = backward(
                spec,
                params,
                &trace,
                &batch.noisy_labels,
                masks.as_ref(),
                sel.indices(),
            )?;
            optimizer_step(params, &grads, optimizer)?;
            stats.add(
                sel.losses().iter().sum(),
                sel.len(),
                batch.len(),
                sel.clean_count().expect("tallied above"),
            );
            Ok(())
        })()
        .map_err(|e| at_batch(e, epoch, b))?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_transition_matrix, NoiseKind};
    use crate::net::{init_parameters, presets, OptimRule};
    use crate::tensor::Tensor;
    use crate::trainers::Algorithm;

    fn tiny_config(algorithm: Algorithm) -> TrainerConfig {
        let mut cfg = TrainerConfig::new(algorithm, 77);
        cfg.batch_size = 4;
        cfg.max_epochs = 20;
        cfg.ramp_epochs = 2;
        cfg.warmup_epochs = 0;
        cfg.dropout_p = 0.0;
        cfg
    }

    fn clean_blobs(n_per_class: usize) -> NoisyDataset {
        crate::data::synthetic_blobs(2, n_per_class, 3, 4.0, 5, false).unwrap()
    }

    #[test]
    fn plain_epoch_touches_every_sample_once() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let mut params = init_parameters(&spec, 1);
        let mut opt =
            OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &params).unwrap();
        let data = clean_blobs(5);
        let cfg = tiny_config(Algorithm::BaselineCe);
        let stats = train_epoch_plain(&spec, &mut params, &mut opt, &data, &cfg, 0).unwrap();
        assert_eq!(stats.examples, 10);
        assert_eq!(stats.selected, 10);
        assert_eq!(stats.clean_selected, 10);
        // 10 samples at batch size 4 → 3 optimizer steps.
        assert_eq!(opt.step_count(), 3);
    }

    #[test]
    fn small_loss_epoch_selects_the_scheduled_fraction() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let mut params = init_parameters(&spec, 1);
        let mut opt =
            OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &params).unwrap();
        let data = clean_blobs(6); // 12 samples → batches of 4, 4, 4
        let mut cfg = tiny_config(Algorithm::MentornetOurs);
        cfg.tau = 0.5;
        // Past the ramp: rate 0.5 → 2 of each 4-batch.
        let stats = train_epoch_small_loss(&spec, &mut params, &mut opt, &data, &cfg, 10).unwrap();
        assert_eq!(stats.examples, 12);
        assert_eq!(stats.selected, 6);
    }

    /// The per-epoch selected fraction follows max(1, floor(R·B'))/B' per
    /// batch and never exceeds R(e) + 1/B'.
    #[test]
    fn selected_fraction_tracks_the_schedule() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let data = clean_blobs(13); // 26 samples → 4·6 + 2
        for tau_percent in [10u32, 35, 50, 72] {
            let mut cfg = tiny_config(Algorithm::MentornetOurs);
            cfg.tau = tau_percent as f64 / 100.0;
            cfg.ramp_epochs = 1;
            let mut params = init_parameters(&spec, 1);
            let mut opt =
                OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &params).unwrap();
            let epoch = 5; // past the ramp → R = 1 − τ
            let rate = 1.0 - cfg.tau;
            let stats =
                train_epoch_small_loss(&spec, &mut params, &mut opt, &data, &cfg, epoch).unwrap();
            let expect: usize = [4usize, 4, 4, 4, 4, 4, 2]
                .iter()
                .map(|&b| ((rate * b as f64).floor() as usize).max(1))
                .sum();
            assert_eq!(stats.selected, expect, "tau {}", cfg.tau);
            let fraction = stats.selected as f64 / stats.examples as f64;
            assert!(fraction <= rate + 1.0 / 2.0, "fraction {fraction}");
        }
    }

    /// Hand-checkable selection wiring: with a frozen single-dense net on
    /// 4 one-hot-ish samples whose losses are forced into a known order,
    /// a rate-1/2 epoch must update exactly on the two small-loss samples.
    #[test]
    fn small_loss_epoch_trains_on_the_small_loss_half() {
        let spec = crate::net::NetworkSpec::new(
            vec![crate::net::LayerSpec::Dense { width: 2 }],
            vec![2],
            2,
        )
        .unwrap();
        // Weights chosen so logits = 3·x: samples on the correct side of
        // the axis get tiny loss, mislabelled ones get large loss.
        let mut params = init_parameters(&spec, 1).zeros_like();
        params
            .get_mut(0)
            .unwrap()
            .weight
            .data_mut()
            .copy_from_slice(&[3.0, 0.0, 0.0, 3.0]);

        // One batch of 4 (batch_size=4, 4 samples). Labels: samples 0 and 2
        // agree with their features (small loss), 1 and 3 are flipped.
        let features = Tensor::new(
            vec![4, 2],
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let data = NoisyDataset::new(features, vec![0, 1, 1, 0], 2).unwrap();

        let mut cfg = tiny_config(Algorithm::MentornetOurs);
        cfg.tau = 0.5;
        cfg.ramp_epochs = 1;
        cfg.optim = OptimRule::SgdMomentum { momentum: 0.0 };
        cfg.learning_rate = 0.5;

        let mut opt = OptimizerState::new(cfg.optim.clone(), 0.5, &params).unwrap();
        let mut trained = params.clone();
        let stats =
            train_epoch_small_loss(&spec, &mut trained, &mut opt, &data, &cfg, 3).unwrap();
        assert_eq!(stats.selected, 2);

        // Expected update: backward over exactly the shuffled positions of
        // samples 0 and 2 (the small-loss pair), one plain SGD step.
        let batch: Vec<_> = epoch_batches(&data, &cfg, 3).unwrap().collect();
        assert_eq!(batch.len(), 1);
        let small: Vec<usize> = (0..4)
            .filter(|&i| {
                let orig = batch[0].indices[i];
                orig == 0 || orig == 2
            })
            .collect();
        let trace = forward(&spec, &params, &batch[0].features, None, Mode::Train).unwrap();
        let grads = backward(
            &spec,
            &params,
            &trace,
            &batch[0].noisy_labels,
            None,
            &small,
        )
        .unwrap();
        let mut expect = params.clone();
        let mut opt2 = OptimizerState::new(cfg.optim.clone(), 0.5, &expect).unwrap();
        optimizer_step(&mut expect, &grads, &mut opt2).unwrap();
        assert_eq!(
            trained.get(0).unwrap().weight.data(),
            expect.get(0).unwrap().weight.data()
        );
    }

    #[test]
    fn warmup_epochs_bypass_selection_entirely() {
        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let mut params = init_parameters(&spec, 1);
        let mut opt =
            OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &params).unwrap();
        let data = clean_blobs(6);
        let mut cfg = tiny_config(Algorithm::MentornetOurs);
        cfg.tau = 0.8;
        cfg.warmup_epochs = 3;
        let stats = train_epoch_small_loss(&spec, &mut params, &mut opt, &data, &cfg, 2).unwrap();
        assert_eq!(stats.selected, stats.examples);
    }

    /// At rate 1 the selection is the identity, so `mentornet_ours` and
    /// `dropout_only` produce bit-identical parameters.
    #[test]
    fn rate_one_small_loss_equals_plain() {
        let base = presets::blob_mlp(3, 2, &[4]).unwrap();
        let (spec, _) = crate::ensemble::make_dropoutnet(&base, 0.4).unwrap();
        let data = clean_blobs(8);
        let mut cfg = tiny_config(Algorithm::MentornetOurs);
        cfg.tau = 0.0; // rate stays 1.0

        let mut p1 = init_parameters(&spec, 9);
        let mut o1 = OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &p1).unwrap();
        let mut p2 = p1.clone();
        let mut o2 = OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &p2).unwrap();

        for epoch in 0..3 {
            train_epoch_small_loss(&spec, &mut p1, &mut o1, &data, &cfg, epoch).unwrap();
            train_epoch_plain(&spec, &mut p2, &mut o2, &data, &cfg, epoch).unwrap();
        }
        for (a, b) in p1.iter().zip(p2.iter()) {
            assert_eq!(a.1.weight.data(), b.1.weight.data());
            assert_eq!(a.1.bias.data(), b.1.bias.data());
        }
    }

    #[test]
    fn label_precision_bookkeeping_uses_the_flip_mask() {
        let clean = clean_blobs(20);
        let matrix = build_transition_matrix(NoiseKind::Symmetric, 0.4, 2).unwrap();
        let noisy = clean.with_noise(&matrix, 123).unwrap();

        let spec = presets::blob_mlp(3, 2, &[4]).unwrap();
        let mut params = init_parameters(&spec, 1);
        let mut opt =
            OptimizerState::new(OptimRule::default_adaptive(), 1e-3, &params).unwrap();
        let cfg = tiny_config(Algorithm::BaselineCe);
        let stats = train_epoch_plain(&spec, &mut params, &mut opt, &noisy, &cfg, 0).unwrap();
        // Full-batch: clean_selected equals the dataset's clean count.
        let clean_count = noisy.flip_mask().iter().filter(|&&f| !f).count();
        assert_eq!(stats.clean_selected, clean_count);
        assert_eq!(stats.selected, noisy.len());
    }
}
