//! Sample-selection primitives shared by every trainer: the remember-rate
//! schedule, small-loss selection, and the prediction-disagreement filter.
//!
//! The remember rate ramps down linearly from 1 to `1 − τ` over the first
//! `ramp_epochs` epochs and stays there, so training starts on (almost) the
//! whole batch and gradually narrows to the fraction believed clean.
//! Small-loss selection keeps the `max(1, floor(rate · len))` samples with
//! the smallest losses — under label noise these are disproportionately the
//! correctly-labelled ones.

use crate::error::{Error, Result};

/// Remember-rate schedule `R(e) = 1 − τ · min(e / ramp_epochs, 1)`.
///
/// `τ` is the estimated noise rate; `ramp_epochs` controls how many epochs
/// the rate takes to descend to its plateau of `1 − τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgetSchedule {
    tau: f64,
    ramp_epochs: usize,
}

impl ForgetSchedule {
    pub fn new(tau: f64, ramp_epochs: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::Config(format!(
                "noise-rate estimate must lie in [0, 1), got {tau}"
            )));
        }
        if ramp_epochs == 0 {
            return Err(Error::Config("ramp_epochs must be at least 1".into()));
        }
        Ok(Self { tau, ramp_epochs })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn ramp_epochs(&self) -> usize {
        self.ramp_epochs
    }

    /// Remember rate at 0-indexed epoch `e`; always in `(0, 1]` and
    /// non-increasing in `e`.
    pub fn remember_rate(&self, epoch: usize) -> f64 {
        let progress = (epoch as f64 / self.ramp_epochs as f64).min(1.0);
        1.0 - self.tau * progress
    }
}

/// Outcome of one small-loss selection: which batch positions survived.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedBatch {
    indices: Vec<usize>,
    losses: Vec<f64>,
    rate: f64,
    clean_count: Option<usize>,
    batch_len: usize,
}

impl SelectedBatch {
    /// Selected positions within the mini-batch, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Losses of the selected samples, parallel to [`indices`](Self::indices).
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// The remember rate this selection was made at.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// How many selected samples carry an unflipped label; `None` until
    /// [`tally_clean`](Self::tally_clean) has been called.
    pub fn clean_count(&self) -> Option<usize> {
        self.clean_count
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Record, from the batch's flip mask, how many selected samples are
    /// clean (label not flipped by noise injection).
    pub fn tally_clean(&mut self, flip_mask: &[bool]) -> Result<()> {
        if flip_mask.len() != self.batch_len {
            return Err(Error::Config(format!(
                "flip mask covers {} samples but the selection was made over {}",
                flip_mask.len(),
                self.batch_len
            )));
        }
        self.clean_count = Some(self.indices.iter().filter(|&&i| !flip_mask[i]).count());
        Ok(())
    }

    /// Remap each selected index through `pool` (used when selection ran on
    /// losses gathered for a subset of the batch: `pool[i]` is the batch
    /// position of pool entry `i`). `batch_len` is the size of the full
    /// batch the pool indices point into.
    pub fn map_through_pool(mut self, pool: &[usize], batch_len: usize) -> Result<Self> {
        if pool.len() != self.batch_len {
            return Err(Error::Config(format!(
                "pool has {} entries but the selection was made over {}",
                pool.len(),
                self.batch_len
            )));
        }
        for idx in &mut self.indices {
            let mapped = pool[*idx];
            if mapped >= batch_len {
                return Err(Error::Config(format!(
                    "pool entry {mapped} is outside the batch of {batch_len}"
                )));
            }
            *idx = mapped;
        }
        // An ascending pool keeps the output ascending; tolerate (and fix)
        // arbitrary pools by re-sorting the index/loss pairs together.
        if !self.indices.windows(2).all(|w| w[0] < w[1]) {
            let mut pairs: Vec<(usize, f64)> = self
                .indices
                .iter()
                .copied()
                .zip(self.losses.iter().copied())
                .collect();
            pairs.sort_unstable_by_key(|&(i, _)| i);
            for (slot, (i, l)) in pairs.into_iter().enumerate() {
                self.indices[slot] = i;
                self.losses[slot] = l;
            }
        }
        self.batch_len = batch_len;
        Ok(self)
    }
}

/// Keep the `max(1, floor(rate · len))` smallest-loss samples.
///
/// Ties are broken toward the lower index; the returned indices are sorted
/// ascending.
pub fn select_small_loss(losses: &[f64], rate: f64) -> Result<SelectedBatch> {
    if losses.is_empty() {
        return Err(Error::Config(
            "small-loss selection over an empty loss vector".into(),
        ));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(format!(
            "remember rate must lie in (0, 1], got {rate}"
        )));
    }
    for (i, &l) in losses.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::NonFinite {
                context: format!("selection loss for batch position {i}"),
            });
        }
    }

    let k = ((rate * losses.len() as f64).floor() as usize).max(1);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        losses[a]
            .partial_cmp(&losses[b])
            .expect("losses checked finite")
            .then(a.cmp(&b))
    });
    let mut indices = order[..k].to_vec();
    indices.sort_unstable();
    let selected_losses = indices.iter().map(|&i| losses[i]).collect();

    Ok(SelectedBatch {
        indices,
        losses: selected_losses,
        rate,
        clean_count: None,
        batch_len: losses.len(),
    })
}

/// Positions where the two prediction vectors disagree, ascending.
pub fn disagreement_filter(pred_a: &[usize], pred_b: &[usize]) -> Result<Vec<usize>> {
    if pred_a.len() != pred_b.len() {
        return Err(Error::Config(format!(
            "disagreement filter over prediction vectors of lengths {} and {}",
            pred_a.len(),
            pred_b.len()
        )));
    }
    Ok((0..pred_a.len()).filter(|&i| pred_a[i] != pred_b[i]).collect())
}
