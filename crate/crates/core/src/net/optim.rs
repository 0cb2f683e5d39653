//! Parameter update rules.
//!
//! Two rules are provided:
//!
//! * `sgd_momentum`: classical momentum,
//!   `v ← μ·v + g`, `w ← w − η·v`.
//!   Hand-checkable arithmetic; the unit tests walk it step by step.
//!
//! * `adaptive_moments`: first/second-moment adaptive estimation with bias
//!   correction. With step counter `t` (starting at 1), decay rates
//!   `β₁ = 0.9`, `β₂ = 0.999`, and `ε = 1e−8`:
//!   `m ← β₁·m + (1−β₁)·g`
//!   `v ← β₂·v + (1−β₂)·g²`
//!   `m̂ = m / (1−β₁ᵗ)`, `v̂ = v / (1−β₂ᵗ)`
//!   `w ← w − η·m̂ / (√v̂ + ε)`
//!   This is the default rule for experiments (η = 1e−3); the harness applies
//!   an additional linear learning-rate decay schedule on top (see
//!   [`crate::trainers::TrainerConfig`]).
//!
//! A non-finite gradient entry aborts the step with an error identifying the
//! layer and tensor, leaving parameters untouched.

use crate::error::{Error, Result};
use crate::net::{GradientBuffer, Parameters};

/// Update rule plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimRule {
    SgdMomentum { momentum: f64 },
    AdaptiveMoments { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimRule {
    /// The adaptive rule with its conventional coefficients.
    pub fn default_adaptive() -> OptimRule {
        OptimRule::AdaptiveMoments {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimRule::SgdMomentum { .. } => "sgd_momentum",
            OptimRule::AdaptiveMoments { .. } => "adaptive_moments",
        }
    }
}

/// Optimizer state: rule, base learning rate, step counter, and moment
/// tensors shape-congruent with the parameters they update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub rule: OptimRule,
    /// Base learning rate η. Callers may scale the effective rate per epoch
    /// (see `TrainerConfig::lr_scale_at`) via [`OptimizerState::set_lr_scale`].
    pub learning_rate: f64,
    lr_scale: f64,
    step: u64,
    /// First moments (or momentum velocity for SGD), keyed like Parameters.
    moments1: Parameters,
    /// Second moments; zero-sized use for SGD (kept allocated for shape
    /// congruence and checkpoint simplicity).
    moments2: Parameters,
}

impl OptimizerState {
    pub fn new(rule: OptimRule, learning_rate: f64, params: &Parameters) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            rule,
            learning_rate,
            lr_scale: 1.0,
            step: 0,
            moments1: params.zeros_like(),
            moments2: params.zeros_like(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Scale applied to the base learning rate on subsequent steps
    /// (supports epoch-level schedules without mutating `learning_rate`).
    pub fn set_lr_scale(&mut self, scale: f64) {
        self.lr_scale = scale;
    }

    pub fn lr_scale(&self) -> f64 {
        self.lr_scale
    }

    pub(crate) fn moments(&self) -> (&Parameters, &Parameters) {
        (&self.moments1, &self.moments2)
    }

    /// Rebuild from checkpoint fields.
    pub(crate) fn from_parts(
        rule: OptimRule,
        learning_rate: f64,
        lr_scale: f64,
        step: u64,
        moments1: Parameters,
        moments2: Parameters,
    ) -> Self {
        OptimizerState {
            rule,
            learning_rate,
            lr_scale,
            step,
            moments1,
            moments2,
        }
    }
}

/// Apply one update step in place.
pub fn optimizer_step(
    params: &mut Parameters,
    grads: &GradientBuffer,
    state: &mut OptimizerState,
) -> Result<()> {
    params.check_congruent(grads, "gradient buffer")?;
    params.check_congruent(&state.moments1, "optimizer moments")?;

    // Reject non-finite gradients up front, identifying the offender, so
    // parameters are never partially updated.
    for (layer, lp) in grads.iter() {
        for (tensor_name, t) in [("weight", &lp.weight), ("bias", &lp.bias)] {
            if let Some(pos) = t.data().iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("gradient for layer {layer} {tensor_name}[{pos}]"),
                });
            }
        }
    }

    state.step += 1;
    let eta = state.learning_rate * state.lr_scale;
    match state.rule {
        OptimRule::SgdMomentum { momentum } => {
            for (layer, lp) in params.iter_mut() {
                let g = grads.get(layer).expect("congruence checked");
                let m = state.moments1.get_mut(layer).expect("congruence checked");
                for (which, (w_t, g_t)) in [(&mut m.weight, &g.weight), (&mut m.bias, &g.bias)]
                    .into_iter()
                    .enumerate()
                {
                    let dst = if which == 0 {
                        lp.weight.data_mut()
                    } else {
                        lp.bias.data_mut()
                    };
                    for ((w, v), &grad) in dst.iter_mut().zip(w_t.data_mut()).zip(g_t.data()) {
                        *v = momentum * *v + grad;
                        *w -= eta * *v;
                    }
                }
            }
        }
        OptimRule::AdaptiveMoments {
            beta1,
            beta2,
            epsilon,
        } => {
            let t = state.step as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for (layer, lp) in params.iter_mut() {
                let g = grads.get(layer).expect("congruence checked");
                let m1 = state.moments1.get_mut(layer).expect("congruence checked");
                let m2 = state.moments2.get_mut(layer).expect("congruence checked");
                for which in 0..2 {
                    let (dst, m_t, v_t, g_t) = if which == 0 {
                        (
                            lp.weight.data_mut(),
                            m1.weight.data_mut(),
                            m2.weight.data_mut(),
                            g.weight.data(),
                        )
                    } else {
                        (
                            lp.bias.data_mut(),
                            m1.bias.data_mut(),
                            m2.bias.data_mut(),
                            g.bias.data(),
                        )
                    };
                    for (((w, m), v), &grad) in
                        dst.iter_mut().zip(m_t.iter_mut()).zip(v_t.iter_mut()).zip(g_t)
                    {
                        *m = beta1 * *m + (1.0 - beta1) * grad;
                        *v = beta2 * *v + (1.0 - beta2) * grad * grad;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *w -= eta * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
    }
    Ok(())
}
