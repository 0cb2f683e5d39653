//! Label-noise transition matrices and seeded injection.
//!
//! Noise is modelled by a row-stochastic C×C matrix T where `T[i][j]` is the
//! probability that a true label `i` is recorded as `j`:
//!
//! * symmetric: `T[i][i] = 1−τ`, all off-diagonal entries `τ/(C−1)` — a flip
//!   never lands on the true class, so the realized flip rate is τ in
//!   expectation;
//! * pairflip: `T[i][i] = 1−τ`, `T[i][(i+1) mod C] = τ` — the asymmetric
//!   construction; at τ = 0.45 the true class remains each row's argmax.
//!
//! Injection resamples every label independently from its matrix row using
//! one uniform draw per sample (CDF walk in class order), so a fixed seed
//! reproduces the identical noisy dataset.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Symmetric,
    Pairflip,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::Pairflip => "pairflip",
        }
    }

    pub fn parse(s: &str) -> Result<NoiseKind> {
        match s {
            "none" => Ok(NoiseKind::None),
            "symmetric" => Ok(NoiseKind::Symmetric),
            "pairflip" => Ok(NoiseKind::Pairflip),
            other => Err(Error::Config(format!(
                "unknown noise kind '{other}' (expected none|symmetric|pairflip)"
            ))),
        }
    }
}

/// Row-stochastic flip-probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    kind: NoiseKind,
    rate: f64,
    class_count: usize,
    /// Row-major C×C probabilities.
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.class_count..(i + 1) * self.class_count]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.class_count + j]
    }

    /// Maximum |row sum − 1| across rows; the construction keeps this below
    /// 1e−12 and tests assert it stays there.
    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.class_count)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Build the matrix for `kind` at rate `tau` over `class_count` classes.
pub fn build_transition_matrix(
    kind: NoiseKind,
    tau: f64,
    class_count: usize,
) -> Result<TransitionMatrix> {
    if class_count < 2 {
        return Err(Error::Config(format!(
            "noise needs ≥ 2 classes, got {class_count}"
        )));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Config(format!(
            "noise rate {tau} outside [0, 1)"
        )));
    }
    let c = class_count;
    let mut entries = vec![0.0; c * c];
    match kind {
        NoiseKind::None => {
            for i in 0..c {
                entries[i * c + i] = 1.0;
            }
        }
        NoiseKind::Symmetric => {
            let off = tau / (c - 1) as f64;
            for i in 0..c {
                for j in 0..c {
                    entries[i * c + j] = if i == j { 1.0 - tau } else { off };
                }
            }
        }
        NoiseKind::Pairflip => {
            for i in 0..c {
                entries[i * c + i] = 1.0 - tau;
                entries[i * c + (i + 1) % c] = tau;
            }
        }
    }
    let rate = if kind == NoiseKind::None { 0.0 } else { tau };
    Ok(TransitionMatrix {
        kind,
        rate,
        class_count,
        entries,
    })
}

/// Resample every label from its transition-matrix row.
///
/// One `next_f64` draw per sample; the drawn uniform walks the row's
/// cumulative sums in class order (any residual mass from rounding falls to
/// the last class).
pub fn inject_noise(
    labels: &[usize],
    matrix: &TransitionMatrix,
    seed: u64,
) -> Result<(Vec<usize>, Vec<bool>)> {
    let c = matrix.class_count();
    let mut stream = SplitMix64::new(seed);
    let mut noisy = Vec::with_capacity(labels.len());
    let mut flips = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(Error::LabelRange {
                sample: i,
                label,
                class_count: c,
            });
        }
        let u = stream.next_f64();
        let row = matrix.row(label);
        let mut cum = 0.0;
        let mut drawn = c - 1;
        for (j, &p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                drawn = j;
                break;
            }
        }
        noisy.push(drawn);
        flips.push(drawn != label);
    }
    Ok((noisy, flips))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_zero_is_identity_for_either_kind() {
        for kind in [NoiseKind::Symmetric, NoiseKind::Pairflip] {
            let m = build_transition_matrix(kind, 0.0, 5).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(m.entry(i, j), if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn symmetric_half_over_ten_classes() {
        let m = build_transition_matrix(NoiseKind::Symmetric, 0.5, 10).unwrap();
        for i in 0..10 {
            assert_eq!(m.entry(i, i), 0.5);
            for j in 0..10 {
                if i != j {
                    assert!((m.entry(i, j) - 0.5 / 9.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn pairflip_superdiagonal_wraps() {
        let m = build_transition_matrix(NoiseKind::Pairflip, 0.45, 10).unwrap();
        for i in 0..10 {
            assert!((m.entry(i, i) - 0.55).abs() < 1e-15);
            assert_eq!(m.entry(i, (i + 1) % 10), 0.45);
            // True class stays the argmax at τ=0.45.
            assert!(m.entry(i, i) > 0.45);
        }
        assert_eq!(m.entry(9, 0), 0.45, "wrapping entry");
    }

    #[test]
    fn rows_are_stochastic_within_1e12() {
        for kind in [NoiseKind::None, NoiseKind::Symmetric, NoiseKind::Pairflip] {
            for &tau in &[0.0, 0.2, 0.45, 0.5, 0.8] {
                for &c in &[2usize, 3, 10, 100] {
                    let m = build_transition_matrix(kind, tau, c).unwrap();
                    assert!(
                        m.max_row_sum_deviation() < 1e-12,
                        "{kind:?} τ={tau} C={c}: deviation {}",
                        m.max_row_sum_deviation()
                    );
                    assert!(m.row(0).iter().all(|&p| p >= 0.0));
                }
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_transition_matrix(NoiseKind::Symmetric, 1.0, 10).is_err());
        assert!(build_transition_matrix(NoiseKind::Symmetric, -0.1, 10).is_err());
        assert!(build_transition_matrix(NoiseKind::Symmetric, 0.5, 1).is_err());
    }

    #[test]
    fn identity_matrix_changes_nothing() {
        let m = build_transition_matrix(NoiseKind::None, 0.0, 4).unwrap();
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let (noisy, flips) = inject_noise(&labels, &m, 5).unwrap();
        assert_eq!(noisy, labels);
        assert!(flips.iter().all(|&f| !f));
    }

    #[test]
    fn symmetric_flip_fraction_within_binomial_bounds() {
        // τ=0.5 over 10k labels: observed flips within 3·sqrt(.5·.5/10k) =
        // ±0.015 of 0.5.
        let m = build_transition_matrix(NoiseKind::Symmetric, 0.5, 10).unwrap();
        let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
        let (_, flips) = inject_noise(&labels, &m, 17).unwrap();
        let frac = flips.iter().filter(|&&f| f).count() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() <= 0.015, "flip fraction {frac}");
    }

    #[test]
    fn pairflip_flips_to_circular_successor_only() {
        let m = build_transition_matrix(NoiseKind::Pairflip, 0.45, 7).unwrap();
        let labels: Vec<usize> = (0..5_000).map(|i| i % 7).collect();
        let (noisy, flips) = inject_noise(&labels, &m, 23).unwrap();
        for i in 0..labels.len() {
            if flips[i] {
                assert_eq!(noisy[i], (labels[i] + 1) % 7, "sample {i}");
            } else {
                assert_eq!(noisy[i], labels[i]);
            }
        }
    }

    #[test]
    fn injection_is_deterministic_per_seed() {
        let m = build_transition_matrix(NoiseKind::Symmetric, 0.3, 5).unwrap();
        let labels: Vec<usize> = (0..1000).map(|i| i % 5).collect();
        assert_eq!(
            inject_noise(&labels, &m, 9).unwrap(),
            inject_noise(&labels, &m, 9).unwrap()
        );
        assert_ne!(
            inject_noise(&labels, &m, 9).unwrap().0,
            inject_noise(&labels, &m, 10).unwrap().0
        );
    }

    #[test]
    fn per_class_transition_frequencies_converge_to_rows() {
        // χ²-style sanity: every empirical cell within 3σ of its matrix
        // probability at N=10k (1000 per class).
        let c = 10;
        let m = build_transition_matrix(NoiseKind::Symmetric, 0.5, c).unwrap();
        let labels: Vec<usize> = (0..10_000).map(|i| i % c).collect();
        let (noisy, _) = inject_noise(&labels, &m, 31).unwrap();
        let mut counts = vec![vec![0usize; c]; c];
        for (&t, &n) in labels.iter().zip(&noisy) {
            counts[t][n] += 1;
        }
        let per_class = 1000.0;
        for i in 0..c {
            for j in 0..c {
                let p = m.entry(i, j);
                let se = (p * (1.0 - p) / per_class).sqrt();
                let obs = counts[i][j] as f64 / per_class;
                assert!(
                    (obs - p).abs() <= 3.0 * se.max(1e-9),
                    "cell ({i},{j}): observed {obs}, expected {p} ± {}",
                    3.0 * se
                );
            }
        }
    }
}
