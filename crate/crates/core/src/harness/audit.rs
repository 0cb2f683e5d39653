//! Empirical verification that injected label noise matches its configured
//! transition matrix — cheap insurance before committing hours to a run.
//!
//! For every (true class i, recorded class j) cell we compare the empirical
//! flip frequency against the configured probability `T[i][j]`. Each cell is
//! a binomial proportion over `n_i` draws (the samples whose true class is
//! `i`), so its standard error is `sqrt(T[i][j]·(1−T[i][j]) / n_i)`; a cell
//! passes when its absolute deviation is within three standard errors. For
//! probability-0 and probability-1 cells the standard error is zero and the
//! empirical frequency must match exactly.

use std::fmt;

use crate::data::{NoisyDataset, TransitionMatrix};
use crate::error::{Error, Result};

/// Outcome of comparing a dataset's realized noise against a configured
/// transition matrix.
#[derive(Debug, Clone)]
pub struct NoiseAudit {
    pub class_count: usize,
    /// Per-true-class sample counts `n_i`.
    pub class_counts: Vec<usize>,
    /// Row-major C×C empirical transition frequencies. Rows with zero
    /// samples copy the configured row (no evidence either way).
    pub empirical: Vec<f64>,
    pub configured: TransitionMatrix,
    /// Largest |empirical − configured| over all cells.
    pub max_abs_deviation: f64,
    /// Cell attaining `max_abs_deviation` (first in row-major order on
    /// ties).
    pub worst_cell: (usize, usize),
    /// True when every cell deviates by at most three binomial standard
    /// errors.
    pub pass: bool,
}

impl NoiseAudit {
    pub fn empirical_cell(&self, i: usize, j: usize) -> f64 {
        self.empirical[i * self.class_count + j]
    }
}

impl fmt::Display for NoiseAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.worst_cell;
        writeln!(
            f,
            "noise audit: {} ({} classes, {} samples)",
            if self.pass { "PASS" } else { "FAIL" },
            self.class_count,
            self.class_counts.iter().sum::<usize>(),
        )?;
        write!(
            f,
            "  worst cell ({i}, {j}): empirical {:.4} vs configured {:.4} (|dev| {:.4}, 3σ tolerance {:.4})",
            self.empirical_cell(i, j),
            self.configured.entry(i, j),
            self.max_abs_deviation,
            3.0 * cell_sigma(self.configured.entry(i, j), self.class_counts[i]),
        )
    }
}

fn cell_sigma(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Compare the dataset's realized (true label → noisy label) frequencies
/// against `configured`, cell by cell, at a 3σ binomial tolerance.
pub fn noise_audit(dataset: &NoisyDataset, configured: &TransitionMatrix) -> Result<NoiseAudit> {
    let c = configured.class_count();
    if dataset.class_count() != c {
        return Err(Error::Config(format!(
            "audit matrix has {c} classes, dataset has {}",
            dataset.class_count()
        )));
    }

    let mut class_counts = vec![0usize; c];
    let mut cell_counts = vec![0usize; c * c];
    for (&t, &n) in dataset
        .true_labels()
        .iter()
        .zip(dataset.noisy_labels().iter())
    {
        class_counts[t] += 1;
        cell_counts[t * c + n] += 1;
    }

    let mut empirical = vec![0.0; c * c];
    let mut max_abs_deviation = 0.0;
    let mut worst_cell = (0, 0);
    let mut pass = true;
    for i in 0..c {
        let n_i = class_counts[i];
        for j in 0..c {
            let p = configured.entry(i, j);
            let freq = if n_i == 0 {
                p
            } else {
                cell_counts[i * c + j] as f64 / n_i as f64
            };
            empirical[i * c + j] = freq;
            let dev = (freq - p).abs();
            if dev > max_abs_deviation {
                max_abs_deviation = dev;
                worst_cell = (i, j);
            }
            if dev > 3.0 * cell_sigma(p, n_i) + 1e-12 {
                pass = false;
            }
        }
    }

    Ok(NoiseAudit {
        class_count: c,
        class_counts,
        empirical,
        configured: configured.clone(),
        max_abs_deviation,
        worst_cell,
        pass,
    })
}
