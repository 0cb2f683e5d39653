//! End-to-end training algorithms.
//!
//! Two families share this module:
//!
//! * **Two-network reference algorithms** — co-teaching (cross-update on
//!   each other's small-loss picks), co-teaching+ (the same restricted to
//!   the disagreement set), and JoCoR (joint loss with symmetric KL
//!   co-regularization) — each training two independently initialized
//!   copies of the base architecture.
//! * **Single-network variants** (the `*_ours` algorithms) — the same
//!   selection rules driven by two dropout *instances* of one widened
//!   network: per batch, instance 1 is the forward pass gradients flow
//!   through, instance 2 is a re-forward under fresh masks whose outputs
//!   act as the "peer". Only instance 1's pass is ever differentiated.
//!
//! `baseline_ce` (plain cross-entropy on the unmodified architecture) and
//! `dropout_only` (the widened dropout network without any selection)
//! anchor the comparisons.
//!
//! All randomness is derived from the run seed via tagged streams (model
//! init, per-epoch shuffle, per-batch-per-instance masks), so a run is
//! reproducible bit-for-bit from its config.

mod ours;
mod single;
mod two_model;

pub use ours::train_epoch_instance_pair;
pub use single::{train_epoch_plain, train_epoch_small_loss};
pub use two_model::train_epoch_two_model;

use crate::data::{batch_iter, BatchIter, NoisyDataset};
use crate::ensemble::{make_dropoutnet, sample_mask_set, DropoutMaskSet, WidenReport};
use crate::error::{Error, Result};
use crate::net::{
    argmax_rows, forward_logits, init_parameters, Mode, NetworkSpec, OptimRule, OptimizerState,
    Parameters,
};
use crate::rng::{derive, domain};
use crate::selection::ForgetSchedule;

/// The training algorithms this crate implements.
///
/// The `*_ours` variants replace the two-network mechanism of their
/// namesake with two dropout instances of a single widened network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Plain cross-entropy on the unmodified architecture.
    BaselineCe,
    /// Widened dropout network, full-batch cross-entropy, no selection.
    DropoutOnly,
    /// Single network, one instance per batch, self-paced small-loss
    /// selection on that instance's own losses.
    MentornetOurs,
    /// Two networks; each trains on the other's small-loss picks.
    Coteaching,
    /// Co-teaching restricted to the prediction-disagreement set.
    CoteachingPlus,
    /// Co-teaching+ driven by two dropout instances of one network.
    CoteachingPlusOurs,
    /// Two networks trained on a shared joint loss (CE + symmetric KL),
    /// jointly selected.
    Jocor,
    /// JoCoR driven by two dropout instances; instance 2 is held constant
    /// in the gradient.
    JocorOurs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::BaselineCe,
        Algorithm::DropoutOnly,
        Algorithm::MentornetOurs,
        Algorithm::Coteaching,
        Algorithm::CoteachingPlus,
        Algorithm::CoteachingPlusOurs,
        Algorithm::Jocor,
        Algorithm::JocorOurs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::BaselineCe => "baseline_ce",
            Algorithm::DropoutOnly => "dropout_only",
            Algorithm::MentornetOurs => "mentornet_ours",
            Algorithm::Coteaching => "coteaching",
            Algorithm::CoteachingPlus => "coteaching_plus",
            Algorithm::CoteachingPlusOurs => "coteaching_plus_ours",
            Algorithm::Jocor => "jocor",
            Algorithm::JocorOurs => "jocor_ours",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!(
                    "unknown algorithm {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }

    /// Does this algorithm train the widened dropout network (as opposed to
    /// the unmodified base architecture)?
    pub fn uses_dropout_net(&self) -> bool {
        matches!(
            self,
            Algorithm::DropoutOnly
                | Algorithm::MentornetOurs
                | Algorithm::CoteachingPlusOurs
                | Algorithm::JocorOurs
        )
    }

    /// Does this algorithm maintain two independent parameter sets?
    pub fn is_two_model(&self) -> bool {
        matches!(
            self,
            Algorithm::Coteaching | Algorithm::CoteachingPlus | Algorithm::Jocor
        )
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a training run needs besides the architecture and the data.
#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    /// Mini-batch size B.
    pub batch_size: usize,
    /// Base learning rate η.
    pub learning_rate: f64,
    /// Noise-rate estimate τ driving the remember-rate schedule.
    pub tau: f64,
    /// Epochs over which the remember rate ramps from 1 down to 1 − τ.
    pub ramp_epochs: usize,
    /// Total epochs E_max.
    pub max_epochs: usize,
    /// Epochs of plain full-batch cross-entropy before selection starts.
    pub warmup_epochs: usize,
    /// Dropout probability p; consumed only by algorithms that train the
    /// widened dropout network.
    pub dropout_p: f64,
    /// JoCoR co-regularization weight λ_w.
    pub jocor_weight: f64,
    /// Run seed; every random stream of the run derives from it.
    pub seed: u64,
    pub optim: OptimRule,
    /// The learning rate stays at η until this epoch…
    pub lr_decay_start: usize,
    /// …then decays linearly, reaching 0 at this epoch.
    pub lr_decay_end: usize,
}

impl TrainerConfig {
    /// Defaults matching the experiment regime: B=128, η=1e-3 (adaptive
    /// moments) decaying linearly over epochs [80, 200], τ=0, 10 ramp
    /// epochs, 200 epochs total, 5 warm-up epochs, p=0.7, λ_w=0.85.
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        TrainerConfig {
            algorithm,
            batch_size: 128,
            learning_rate: 1e-3,
            tau: 0.0,
            ramp_epochs: 10,
            max_epochs: 200,
            warmup_epochs: 5,
            dropout_p: 0.7,
            jocor_weight: 0.85,
            seed,
            optim: OptimRule::default_adaptive(),
            lr_decay_start: 80,
            lr_decay_end: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be ≥ 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::Config(format!(
                "noise-rate estimate must lie in [0, 1), got {}",
                self.tau
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be ≥ 1".into()));
        }
        if self.ramp_epochs == 0 || self.ramp_epochs > self.max_epochs {
            return Err(Error::Config(format!(
                "ramp_epochs must lie in [1, max_epochs={}], got {}",
                self.max_epochs, self.ramp_epochs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout probability must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(0.0..=1.0).contains(&self.jocor_weight) {
            return Err(Error::Config(format!(
                "jocor weight must lie in [0, 1], got {}",
                self.jocor_weight
            )));
        }
        if self.lr_decay_start > self.lr_decay_end {
            return Err(Error::Config(format!(
                "lr decay window [{}, {}] is reversed",
                self.lr_decay_start, self.lr_decay_end
            )));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<ForgetSchedule> {
        ForgetSchedule::new(self.tau, self.ramp_epochs)
    }

    /// Learning-rate multiplier at `epoch`: 1 up to `lr_decay_start`, then
    /// linear down to 0 at `lr_decay_end`.
    pub fn lr_scale_at(&self, epoch: usize) -> f64 {
        if epoch <= self.lr_decay_start {
            1.0
        } else if epoch >= self.lr_decay_end {
            0.0
        } else {
            (self.lr_decay_end - epoch) as f64 / (self.lr_decay_end - self.lr_decay_start) as f64
        }
    }

    /// Is `epoch` still in the full-batch cross-entropy warm-up phase?
    pub fn in_warmup(&self, epoch: usize) -> bool {
        epoch < self.warmup_epochs
    }
}

/// Per-epoch observables, one row of the metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 0-indexed epoch.
    pub epoch: usize,
    /// Mean loss over the samples actually trained on.
    pub train_loss: f64,
    /// Accuracy on the full test set after this epoch.
    pub test_acc: f64,
    /// Fraction of examined samples that were selected for the update.
    pub selected_fraction: f64,
    /// Fraction of selected samples whose label was not flipped.
    pub label_precision: f64,
}

/// Raw per-epoch accumulators; batches add into this and
/// [`into_metrics`](EpochStats::into_metrics) turns it into ratios.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpochStats {
    /// Sum of the per-sample training losses over all selected samples.
    pub loss_sum: f64,
    /// Number of (sample, update) participations.
    pub selected: usize,
    /// Number of (sample, update) opportunities.
    pub examples: usize,
    /// Selected samples whose label is clean.
    pub clean_selected: usize,
}

impl EpochStats {
    pub(crate) fn add(&mut self, loss_sum: f64, selected: usize, examples: usize, clean: usize) {
        self.loss_sum += loss_sum;
        self.selected += selected;
        self.examples += examples;
        self.clean_selected += clean;
    }

    pub fn into_metrics(self, epoch: usize, test_acc: f64) -> EpochMetrics {
        debug_assert!(self.selected > 0 && self.examples >= self.selected);
        EpochMetrics {
            epoch,
            train_loss: self.loss_sum / self.selected as f64,
            test_acc,
            selected_fraction: self.selected as f64 / self.examples as f64,
            label_precision: self.clean_selected as f64 / self.selected as f64,
        }
    }
}

/// One network's trainable state.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub params: Parameters,
    pub optimizer: OptimizerState,
}

/// A full training run: the (possibly widened) architecture, one or two
/// models, and the epoch cursor. Feed it epochs via
/// [`run_epoch`](Trainer::run_epoch).
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainerConfig,
    spec: NetworkSpec,
    widen_report: Option<WidenReport>,
    models: Vec<ModelState>,
    next_epoch: usize,
}

impl Trainer {
    /// Build a fresh run from the *base* (unwidened) architecture. For
    /// dropout-network algorithms the architecture is widened by
    /// 1/(1 − p) and dropout sites are inserted; the others train `base`
    /// as given.
    pub fn new(base: &NetworkSpec, cfg: TrainerConfig) -> Result<Trainer> {
        cfg.validate()?;
        let (spec, widen_report) = if cfg.algorithm.uses_dropout_net() {
            let (spec, report) = make_dropoutnet(base, cfg.dropout_p)?;
            (spec, Some(report))
        } else {
            (base.clone(), None)
        };

        let model_count = if cfg.algorithm.is_two_model() { 2 } else { 1 };
        let models = (0..model_count)
            .map(|m| {
                let init_seed = derive(cfg.seed, &[domain::INIT, m as u64]);
                let params = init_parameters(&spec, init_seed);
                let optimizer = OptimizerState::new(cfg.optim.clone(), cfg.learning_rate, &params)?;
                Ok(ModelState { params, optimizer })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Trainer {
            cfg,
            spec,
            widen_report,
            models,
            next_epoch: 0,
        })
    }

    /// Reassemble a run from checkpoint parts. `spec` is the trained
    /// architecture exactly as stored (already widened where applicable).
    pub fn resume(
        cfg: TrainerConfig,
        spec: NetworkSpec,
        models: Vec<ModelState>,
        next_epoch: usize,
    ) -> Result<Trainer> {
        cfg.validate()?;
        let expect = if cfg.algorithm.is_two_model() { 2 } else { 1 };
        if models.len() != expect {
            return Err(Error::Config(format!(
                "{} restores {expect} model(s), got {}",
                cfg.algorithm,
                models.len()
            )));
        }
        Ok(Trainer {
            cfg,
            spec,
            widen_report: None,
            models,
            next_epoch,
        })
    }

    pub fn cfg(&self) -> &TrainerConfig {
        &self.cfg
    }

    /// The architecture actually trained (widened for dropout-network
    /// algorithms).
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Widening summary, present when this run built a dropout network.
    pub fn widen_report(&self) -> Option<&WidenReport> {
        self.widen_report.as_ref()
    }

    pub fn models(&self) -> &[ModelState] {
        &self.models
    }

    /// The next epoch [`run_epoch`](Self::run_epoch) will execute.
    pub fn next_epoch(&self) -> usize {
        self.next_epoch
    }

    pub fn is_finished(&self) -> bool {
        self.next_epoch >= self.cfg.max_epochs
    }

    /// Train one epoch and evaluate on `test`. Returns that epoch's
    /// metrics row and advances the epoch cursor.
    pub fn run_epoch(&mut self, train: &NoisyDataset, test: &NoisyDataset) -> Result<EpochMetrics> {
        if self.is_finished() {
            return Err(Error::Config(format!(
                "run is complete at {} epochs",
                self.cfg.max_epochs
            )));
        }
        for set in [train, test] {
            if set.class_count() != self.spec.class_count() {
                return Err(Error::Config(format!(
                    "dataset has {} classes but the network outputs {}",
                    set.class_count(),
                    self.spec.class_count()
                )));
            }
        }

        let epoch = self.next_epoch;
        let scale = self.cfg.lr_scale_at(epoch);
        for model in &mut self.models {
            model.optimizer.set_lr_scale(scale);
        }

        let stats = match self.cfg.algorithm {
            Algorithm::BaselineCe | Algorithm::DropoutOnly => {
                let m = &mut self.models[0];
                train_epoch_plain(&self.spec, &mut m.params, &mut m.optimizer, train, &self.cfg, epoch)?
            }
            Algorithm::MentornetOurs => {
                let m = &mut self.models[0];
                train_epoch_small_loss(
                    &self.spec,
                    &mut m.params,
                    &mut m.optimizer,
                    train,
                    &self.cfg,
                    epoch,
                )?
            }
            Algorithm::CoteachingPlusOurs | Algorithm::JocorOurs => {
                let m = &mut self.models[0];
                train_epoch_instance_pair(
                    &self.spec,
                    &mut m.params,
                    &mut m.optimizer,
                    train,
                    &self.cfg,
                    epoch,
                )?
            }
            Algorithm::Coteaching | Algorithm::CoteachingPlus | Algorithm::Jocor => {
                let (a, b) = self.models.split_at_mut(1);
                train_epoch_two_model(&self.spec, &mut a[0], &mut b[0], train, &self.cfg, epoch)?
            }
        };

        let test_acc = evaluate(&self.spec, &self.models[0].params, test)?;
        self.next_epoch += 1;
        Ok(stats.into_metrics(epoch, test_acc))
    }
}

/// Accuracy of `params` on `test` under eval-mode forward passes (dropout
/// is the identity). Argmax ties resolve to the lowest class index.
pub fn evaluate(spec: &NetworkSpec, params: &Parameters, test: &NoisyDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Data("evaluation on an empty test set".into()));
    }
    const EVAL_BATCH: usize = 512;
    let n = test.len();
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_BATCH).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let features = test.features().gather_rows(&indices)?;
        let logits = forward_logits(spec, params, &features, None, Mode::Eval)?;
        for (i, &pred) in argmax_rows(&logits).iter().enumerate() {
            if pred == test.true_labels()[start + i] {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / n as f64)
}

/// The seeded shuffled batch stream for `epoch` of this run.
pub(crate) fn epoch_batches<'a>(
    data: &'a NoisyDataset,
    cfg: &TrainerConfig,
    epoch: usize,
) -> Result<BatchIter<'a>> {
    batch_iter(
        data,
        cfg.batch_size,
        derive(cfg.seed, &[domain::SHUFFLE, epoch as u64]),
    )
}

/// Sample the mask set for (`epoch`, `batch`, `instance`) when the spec has
/// dropout sites; specs without sites train unmasked.
pub(crate) fn batch_masks(
    spec: &NetworkSpec,
    run_seed: u64,
    epoch: usize,
    batch: usize,
    instance: u64,
) -> Result<Option<DropoutMaskSet>> {
    if spec.dropout_sites().is_empty() {
        return Ok(None);
    }
    let seed = derive(
        run_seed,
        &[domain::MASK, epoch as u64, batch as u64, instance],
    );
    Ok(Some(sample_mask_set(spec, seed)?))
}

/// Attach epoch/batch coordinates to numeric failures so an aborted run
/// says where it died.
pub(crate) fn at_batch(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonFinite { context } => Error::NonFinite {
            context: format!("{context} (epoch {epoch}, batch {batch})"),
        },
        other => other,
    }
}

/// Count the clean labels among all batch rows (full-batch updates).
pub(crate) fn clean_total(flip_mask: &[bool]) -> usize {
    flip_mask.iter().filter(|&&flipped| !flipped).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::presets;
    use crate::tensor::Tensor;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::parse(a.name()).unwrap(), a);
        }
        let err = Algorithm::parse("co-teaching").unwrap_err();
        assert_eq!(err.class(), "config");
        assert!(err.to_string().contains("baseline_ce"));
    }

    #[test]
    fn algorithm_families() {
        use Algorithm::*;
        let dropout: Vec<_> = Algorithm::ALL
            .into_iter()
            .filter(|a| a.uses_dropout_net())
            .collect();
        assert_eq!(
            dropout,
            [DropoutOnly, MentornetOurs, CoteachingPlusOurs, JocorOurs]
        );
        let two: Vec<_> = Algorithm::ALL
            .into_iter()
            .filter(|a| a.is_two_model())
            .collect();
        assert_eq!(two, [Coteaching, CoteachingPlus, Jocor]);
    }

    #[test]
    fn config_validation() {
        let good = TrainerConfig::new(Algorithm::BaselineCe, 1);
        good.validate().unwrap();

        let mut c = good.clone();
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.tau = 1.0;
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.ramp_epochs = c.max_epochs + 1;
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.dropout_p = 1.0;
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.jocor_weight = 1.5;
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.lr_decay_start = 100;
        c.lr_decay_end = 50;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lr_scale_is_flat_then_linear_then_zero() {
        let mut cfg = TrainerConfig::new(Algorithm::BaselineCe, 1);
        cfg.lr_decay_start = 80;
        cfg.lr_decay_end = 200;
        assert_eq!(cfg.lr_scale_at(0), 1.0);
        assert_eq!(cfg.lr_scale_at(80), 1.0);
        assert_eq!(cfg.lr_scale_at(140), 0.5);
        assert_eq!(cfg.lr_scale_at(200), 0.0);
        assert_eq!(cfg.lr_scale_at(500), 0.0);
        for e in 0..250 {
            assert!(cfg.lr_scale_at(e) >= cfg.lr_scale_at(e + 1));
        }
    }

    #[test]
    fn stats_turn_into_ratio_metrics() {
        let mut stats = EpochStats::default();
        stats.add(6.0, 3, 4, 2);
        stats.add(2.0, 1, 4, 1);
        let m = stats.into_metrics(7, 0.5);
        assert_eq!(m.epoch, 7);
        assert_eq!(m.train_loss, 2.0);
        assert_eq!(m.test_acc, 0.5);
        assert_eq!(m.selected_fraction, 0.5);
        assert_eq!(m.label_precision, 0.75);
    }

    /// A linear single-dense classifier over flat features, for evaluation
    /// tests that need hand-settable weights.
    fn linear_spec(dim: usize, class_count: usize) -> NetworkSpec {
        NetworkSpec::new(
            vec![crate::net::LayerSpec::Dense { width: class_count }],
            vec![dim],
            class_count,
        )
        .unwrap()
    }

    /// Balanced 10-class dataset with constant logits: the tie rule sends
    /// every prediction to class 0, so accuracy is exactly class 0's share.
    #[test]
    fn evaluate_tie_rule_scores_class_zero_share() {
        let spec = linear_spec(4, 10);
        let params = init_parameters(&spec, 3).zeros_like();
        let n = 40;
        let features = Tensor::zeros(vec![n, 4]);
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let test = NoisyDataset::new(features, labels, 10).unwrap();
        let acc = evaluate(&spec, &params, &test).unwrap();
        assert_eq!(acc, 0.1);
    }

    #[test]
    fn evaluate_perfect_predictor_scores_one() {
        // Identity weights on 2-d one-hot features predict the label.
        let spec = linear_spec(2, 2);
        let mut params = init_parameters(&spec, 3).zeros_like();
        let lp = params.get_mut(0).unwrap();
        lp.weight.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let features = Tensor::new(vec![4, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let test = NoisyDataset::new(features, vec![0, 1, 0, 1], 2).unwrap();
        assert_eq!(evaluate(&spec, &params, &test).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_rejects_an_empty_test_set() {
        let spec = linear_spec(4, 3);
        let params = init_parameters(&spec, 3);
        let empty = NoisyDataset::empty_for_tests(4, 3);
        let err = evaluate(&spec, &params, &empty).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "got {err:?}");
    }

    #[test]
    fn trainer_builds_the_right_model_count_and_spec() {
        let base = presets::blob_mlp(4, 3, &[6]).unwrap();

        let single = Trainer::new(&base, TrainerConfig::new(Algorithm::BaselineCe, 9)).unwrap();
        assert_eq!(single.models().len(), 1);
        assert_eq!(single.spec().layers().len(), base.layers().len());
        assert!(single.widen_report().is_none());

        let pair = Trainer::new(&base, TrainerConfig::new(Algorithm::Coteaching, 9)).unwrap();
        assert_eq!(pair.models().len(), 2);
        // Independent init streams: the two nets start different.
        assert_ne!(
            pair.models()[0].params.get(0).unwrap().weight.data(),
            pair.models()[1].params.get(0).unwrap().weight.data()
        );

        let mut cfg = TrainerConfig::new(Algorithm::CoteachingPlusOurs, 9);
        cfg.dropout_p = 0.5;
        let ours = Trainer::new(&base, cfg).unwrap();
        assert!(ours.widen_report().is_some());
        assert!(!ours.spec().dropout_sites().is_empty());
        // Hidden width 6 widened by 1/(1-0.5) = 12.
        assert_eq!(ours.widen_report().unwrap().entries[0].widened, 12);
    }
}
