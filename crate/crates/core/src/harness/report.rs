//! Metrics persistence and result aggregation.
//!
//! The per-epoch CSV is the ground truth: aggregation always recomputes
//! from parsed CSV rows (see [`RunReport::from_run_dir`]), and
//! [`run_experiment`](crate::harness::run_experiment) builds its return
//! value through the same path, so the in-memory report and an after-the-
//! fact recomputation from disk can never drift apart.
//!
//! Headline statistic: mean test accuracy over the final `min(10, E_max)`
//! epochs of each seed. Because the source material's ± convention is
//! ambiguous, *two* spreads are reported, explicitly labeled: the sample
//! standard deviation across per-seed means, and the sample standard
//! deviation of the pooled last-10 window values.

use std::fmt::Write as _;
use std::path::Path;

use crate::ensemble::{WidenEntry, WidenReport};
use crate::error::{Error, Result};
use crate::harness::kv::KvMap;
use crate::trainers::EpochMetrics;

/// Exact header of every metrics CSV; tests diff files byte-for-byte
/// against rerenders, so this must never change silently.
pub const METRICS_CSV_HEADER: &str = "epoch,train_loss,test_acc,selected_fraction,label_precision";

/// Render epoch rows to CSV text (6-decimal fixed formatting).
pub fn render_metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.epoch, r.train_loss, r.test_acc, r.selected_fraction, r.label_precision
        )
        .expect("writing to String cannot fail");
    }
    out
}

/// Parse CSV text back into epoch rows, verifying the header and that
/// epochs run 0, 1, 2, … (`path` only labels errors).
pub fn parse_metrics_csv(text: &str, path: &Path) -> Result<Vec<EpochMetrics>> {
    let bad = |line: usize, detail: String| {
        Error::Data(format!("{} line {line}: {detail}", path.display()))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_CSV_HEADER => {}
        Some((_, h)) => return Err(bad(1, format!("unexpected header '{h}'"))),
        None => return Err(bad(1, "empty metrics file".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(lineno, format!("expected 5 fields, got {}", fields.len())));
        }
        let epoch: usize = fields[0]
            .parse()
            .map_err(|e| bad(lineno, format!("bad epoch '{}': {e}", fields[0])))?;
        if epoch != rows.len() {
            return Err(bad(
                lineno,
                format!("epoch {epoch} out of order (expected {})", rows.len()),
            ));
        }
        let mut nums = [0.0f64; 4];
        for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse()
                .map_err(|e| bad(lineno, format!("bad value '{field}': {e}")))?;
        }
        rows.push(EpochMetrics {
            epoch,
            train_loss: nums[0],
            test_acc: nums[1],
            selected_fraction: nums[2],
            label_precision: nums[3],
        });
    }
    if rows.is_empty() {
        return Err(bad(1, "metrics file has a header but no rows".into()));
    }
    Ok(rows)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two
/// values.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// The final `min(10, len)` epochs — the headline-metric window.
fn last_window(epochs: &[EpochMetrics]) -> &[EpochMetrics] {
    let w = epochs.len().min(10);
    &epochs[epochs.len() - w..]
}

/// One seed's trained trajectory plus its headline statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// Mean test accuracy over the last `min(10, E_max)` epochs.
    pub last10_mean: f64,
    /// Sample std of test accuracy over that same window.
    pub last10_std: f64,
}

impl SeedOutcome {
    pub fn from_epochs(seed: u64, epochs: Vec<EpochMetrics>) -> Result<SeedOutcome> {
        if epochs.is_empty() {
            return Err(Error::Data(format!("seed {seed} has no epoch rows")));
        }
        let accs: Vec<f64> = last_window(&epochs).iter().map(|r| r.test_acc).collect();
        Ok(SeedOutcome {
            seed,
            last10_mean: mean(&accs),
            last10_std: sample_std(&accs),
            epochs,
        })
    }
}

/// Aggregated results of a (possibly multi-seed) experiment.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Resolved config echo the run was executed under.
    pub config: KvMap,
    /// Per-seed outcomes, in ascending seed order.
    pub seeds: Vec<SeedOutcome>,
    /// Mean over the per-seed last-10 means — the headline number.
    pub mean_test_acc: f64,
    /// Sample std of the per-seed last-10 means (0 for a single seed; see
    /// [`single_seed`](RunReport::single_seed)).
    pub std_across_seeds: f64,
    /// Sample std of the pooled per-epoch accuracies in all seeds' last-10
    /// windows — the other reading of a "± over the last 10 epochs".
    pub std_across_window: f64,
    /// Flags that `std_across_seeds` is 0 by construction, not by luck.
    pub single_seed: bool,
    /// Architecture widening applied by dropout-network algorithms.
    pub widen: Option<WidenReport>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    /// Aggregate per-seed outcomes (sorts them by seed first).
    pub fn aggregate(
        config: KvMap,
        mut seeds: Vec<SeedOutcome>,
        widen: Option<WidenReport>,
        wall_clock_secs: f64,
    ) -> Result<RunReport> {
        if seeds.is_empty() {
            return Err(Error::Data("report has no seed outcomes".into()));
        }
        seeds.sort_by_key(|s| s.seed);
        let seed_means: Vec<f64> = seeds.iter().map(|s| s.last10_mean).collect();
        let pooled: Vec<f64> = seeds
            .iter()
            .flat_map(|s| last_window(&s.epochs).iter().map(|r| r.test_acc))
            .collect();
        Ok(RunReport {
            config,
            mean_test_acc: mean(&seed_means),
            std_across_seeds: sample_std(&seed_means),
            std_across_window: sample_std(&pooled),
            single_seed: seeds.len() == 1,
            seeds,
            widen,
            wall_clock_secs,
        })
    }

    /// Rebuild a report from a run directory: re-reads `config.kv` and every
    /// `seed_*/metrics.csv` and recomputes all statistics from the rows.
    /// Wall clock and widening details come from `report.kv` when present
    /// (they are not derivable from the CSVs).
    ///
    /// Only seeds listed in the config's `run.seeds` are aggregated, so a
    /// rerun with a reduced seed list is not contaminated by stale sibling
    /// directories; seeds the run never reached are simply absent (partial
    /// runs still report).
    pub fn from_run_dir(dir: impl AsRef<Path>) -> Result<RunReport> {
        let dir = dir.as_ref();
        let config = KvMap::parse_file(dir.join("config.kv"))?;
        let allowed: Option<Vec<u64>> = config.get("run.seeds").map(|raw| {
            raw.split(',')
                .filter_map(|s| s.trim().parse().ok())
                .collect()
        });

        let mut seeds = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            if !entry.path().is_dir() {
                continue;
            }
            let name = entry.file_name();
            let Some(seed) = name
                .to_str()
                .and_then(|n| n.strip_prefix("seed_"))
                .and_then(|n| n.parse::<u64>().ok())
            else {
                continue;
            };
            if let Some(allowed) = &allowed {
                if !allowed.contains(&seed) {
                    continue;
                }
            }
            let csv_path = entry.path().join("metrics.csv");
            let text = std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            let rows = parse_metrics_csv(&text, &csv_path)?;
            seeds.push(SeedOutcome::from_epochs(seed, rows)?);
        }
        if seeds.is_empty() {
            return Err(Error::Data(format!(
                "{} contains no seed_<n>/metrics.csv results",
                dir.display()
            )));
        }

        let (widen, wall_clock_secs) = match KvMap::parse_file(dir.join("report.kv")) {
            Ok(report_kv) => (
                widen_from_kv(&report_kv)?,
                report_kv
                    .get("report.wall_clock_secs")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0.0),
            ),
            Err(_) => (None, 0.0),
        };
        RunReport::aggregate(config, seeds, widen, wall_clock_secs)
    }

    /// Epochs every seed ran (they are uniform within a run).
    pub fn epoch_count(&self) -> usize {
        self.seeds.iter().map(|s| s.epochs.len()).max().unwrap_or(0)
    }

    /// The `report.kv` rendering of the aggregate numbers.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("report.mean_test_acc", format!("{:.6}", self.mean_test_acc));
        kv.set(
            "report.std_across_seeds",
            format!("{:.6}", self.std_across_seeds),
        );
        kv.set(
            "report.std_across_window",
            format!("{:.6}", self.std_across_window),
        );
        kv.set("report.single_seed", self.single_seed);
        kv.set("report.seed_count", self.seeds.len());
        kv.set("report.epoch_count", self.epoch_count());
        kv.set(
            "report.wall_clock_secs",
            format!("{:.3}", self.wall_clock_secs),
        );
        for s in &self.seeds {
            kv.set(
                format!("seed.{}.last10_mean", s.seed),
                format!("{:.6}", s.last10_mean),
            );
            kv.set(
                format!("seed.{}.last10_std", s.seed),
                format!("{:.6}", s.last10_std),
            );
        }
        if let Some(w) = &self.widen {
            widen_to_kv(w, &mut kv);
        }
        kv
    }

    /// Human-readable summary block.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let seed_list: Vec<String> = self.seeds.iter().map(|s| s.seed.to_string()).collect();
        writeln!(
            out,
            "seeds: {} ({}), epochs: {}",
            self.seeds.len(),
            seed_list.join(", "),
            self.epoch_count()
        )
        .unwrap();
        for s in &self.seeds {
            writeln!(
                out,
                "  seed {}: last-10 test acc {:.4} (window std {:.4})",
                s.seed, s.last10_mean, s.last10_std
            )
            .unwrap();
        }
        writeln!(out, "mean last-10 test accuracy: {:.4}", self.mean_test_acc).unwrap();
        if self.single_seed {
            writeln!(out, "std across seeds: 0 (single seed)").unwrap();
        } else {
            writeln!(
                out,
                "std across seeds (sample, n−1): {:.4}",
                self.std_across_seeds
            )
            .unwrap();
        }
        writeln!(
            out,
            "std across pooled last-10 window: {:.4}",
            self.std_across_window
        )
        .unwrap();
        if let Some(w) = &self.widen {
            let entries: Vec<String> = w
                .entries
                .iter()
                .map(|e| format!("layer {} {}: {}→{}", e.layer, e.kind, e.original, e.widened))
                .collect();
            writeln!(
                out,
                "widened (p = {}, factor {:.4}): {}",
                w.p,
                w.factor,
                entries.join(", ")
            )
            .unwrap();
        }
        writeln!(out, "wall clock: {:.1} s", self.wall_clock_secs).unwrap();
        out
    }
}

fn widen_to_kv(w: &WidenReport, kv: &mut KvMap) {
    kv.set("widen.p", w.p);
    kv.set("widen.factor", w.factor);
    let entries: Vec<String> = w
        .entries
        .iter()
        .map(|e| format!("{}:{}:{}:{}", e.layer, e.kind, e.original, e.widened))
        .collect();
    kv.set("widen.entries", entries.join(";"));
}

fn widen_from_kv(kv: &KvMap) -> Result<Option<WidenReport>> {
    let Some(p) = kv.get("widen.p") else {
        return Ok(None);
    };
    let bad = |what: &str| Error::Data(format!("report.kv: malformed {what}"));
    let p: f64 = p.parse().map_err(|_| bad("widen.p"))?;
    let factor: f64 = kv
        .get("widen.factor")
        .ok_or_else(|| bad("widen.factor"))?
        .parse()
        .map_err(|_| bad("widen.factor"))?;
    let mut entries = Vec::new();
    let raw = kv.get("widen.entries").ok_or_else(|| bad("widen.entries"))?;
    for item in raw.split(';').filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        if parts.len() != 4 {
            return Err(bad("widen.entries"));
        }
        let kind = match parts[1] {
            "dense" => "dense",
            "conv2d" => "conv2d",
            _ => return Err(bad("widen.entries kind")),
        };
        entries.push(WidenEntry {
            layer: parts[0].parse().map_err(|_| bad("widen.entries layer"))?,
            kind,
            original: parts[2].parse().map_err(|_| bad("widen.entries width"))?,
            widened: parts[3].parse().map_err(|_| bad("widen.entries width"))?,
        });
    }
    Ok(Some(WidenReport { p, factor, entries }))
}

/// Side-by-side comparison of two runs' headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunComparison {
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_b − mean_a`: positive when the second run is better.
    pub difference: f64,
}

impl RunComparison {
    pub fn winner(&self) -> &'static str {
        if self.difference > 0.0 {
            "second"
        } else if self.difference < 0.0 {
            "first"
        } else {
            "tie"
        }
    }
}

impl std::fmt::Display for RunComparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "first:  {:.4}\nsecond: {:.4}",
            self.mean_a, self.mean_b
        )?;
        write!(
            f,
            "difference: {:+.4} ({:+.2} points) — {}",
            self.difference,
            self.difference * 100.0,
            match self.winner() {
                "tie" => "tie".to_string(),
                w => format!("{w} run higher"),
            }
        )
    }
}

/// Compare two runs trained on the same data and noise. Any differing
/// `dataset.*`/`noise.*` key or a different epoch count is an error — a
/// comparison across different tasks would be meaningless.
pub fn compare_runs(a: &RunReport, b: &RunReport) -> Result<RunComparison> {
    let mut differing: Vec<&str> = Vec::new();
    let relevant = |k: &str| k.starts_with("dataset.") || k.starts_with("noise.");
    for (k, v) in a.config.iter().filter(|(k, _)| relevant(k)) {
        if b.config.get(k) != Some(v) {
            differing.push(k);
        }
    }
    for (k, _) in b.config.iter().filter(|(k, _)| relevant(k)) {
        if a.config.get(k).is_none() {
            differing.push(k);
        }
    }
    if !differing.is_empty() {
        differing.sort_unstable();
        return Err(Error::Config(format!(
            "runs are not comparable; differing keys: {}",
            differing.join(", ")
        )));
    }
    if a.epoch_count() != b.epoch_count() {
        return Err(Error::Config(format!(
            "runs trained for different epoch counts: {} vs {}",
            a.epoch_count(),
            b.epoch_count()
        )));
    }
    Ok(RunComparison {
        mean_a: a.mean_test_acc,
        mean_b: b.mean_test_acc,
        difference: b.mean_test_acc - a.mean_test_acc,
    })
}
