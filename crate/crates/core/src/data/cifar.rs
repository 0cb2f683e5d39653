//! CIFAR binary-format readers.
//!
//! CIFAR-10 ships as fixed-stride binary records: 1 label byte followed by
//! 3072 pixel bytes (3 channels × 32 × 32, channel-major). CIFAR-100 records
//! carry two label bytes (coarse, then fine) before the same 3072 pixels; we
//! keep the fine label and its 100 classes. Record counts are derived from
//! file sizes, so a truncated file fails loudly (`size % stride != 0`)
//! instead of silently dropping the tail.

use std::path::{Path, PathBuf};

use crate::data::NoisyDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const PIXELS: usize = 3 * 32 * 32;

/// Read every record from `path`, pushing scaled pixels and labels.
///
/// `label_bytes` is 1 for CIFAR-10, 2 for CIFAR-100 (the *last* label byte
/// is kept — CIFAR-100's fine label).
fn read_records(
    path: &Path,
    label_bytes: usize,
    class_count: usize,
    features: &mut Vec<f64>,
    labels: &mut Vec<usize>,
    remaining: &mut usize,
) -> Result<()> {
    let stride = label_bytes + PIXELS;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % stride != 0 {
        let whole = bytes.len() / stride;
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: (whole * stride) as u64,
            detail: format!(
                "{} bytes is not a multiple of the {stride}-byte record stride",
                bytes.len()
            ),
        });
    }
    for (i, record) in bytes.chunks_exact(stride).enumerate() {
        if *remaining == 0 {
            break;
        }
        let label = record[label_bytes - 1] as usize;
        if label >= class_count {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: (i * stride) as u64,
                detail: format!("label {label} out of range for {class_count} classes"),
            });
        }
        labels.push(label);
        features.extend(record[label_bytes..].iter().map(|&p| p as f64 / 255.0));
        *remaining -= 1;
    }
    Ok(())
}

fn load_cifar(
    paths: &[PathBuf],
    label_bytes: usize,
    class_count: usize,
    limit: Option<usize>,
) -> Result<NoisyDataset> {
    if paths.is_empty() {
        return Err(Error::Data("no CIFAR batch files given".into()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut remaining = limit.unwrap_or(usize::MAX);
    for path in paths {
        read_records(
            path,
            label_bytes,
            class_count,
            &mut features,
            &mut labels,
            &mut remaining,
        )?;
    }
    if labels.is_empty() {
        return Err(Error::Data("CIFAR batch files contain no records".into()));
    }
    let n = labels.len();
    let tensor = Tensor::new(vec![n, 3, 32, 32], features)?;
    NoisyDataset::new(tensor, labels, class_count)
}

/// Load CIFAR-10 batch files (1 label byte + 3072 pixels per record).
pub fn load_cifar10(paths: &[PathBuf], limit: Option<usize>) -> Result<NoisyDataset> {
    load_cifar(paths, 1, 10, limit)
}

/// Load CIFAR-100 batch files (coarse + fine label bytes; fine label kept).
pub fn load_cifar100(paths: &[PathBuf], limit: Option<usize>) -> Result<NoisyDataset> {
    load_cifar(paths, 2, 100, limit)
}
