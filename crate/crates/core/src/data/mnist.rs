//! MNIST IDX-format reader.
//!
//! Standard big-endian IDX files: images carry magic 2051 and dims
//! `[N, 28, 28]` of unsigned bytes; labels carry magic 2049 and `[N]`
//! bytes. Pixels are scaled to `[0, 1]` (255 → 1.0); features come out as
//! `[N, 1, 28, 28]` so conv and dense presets both accept them.
//!
//! Files are validated by size before reading, so a truncated download is
//! reported with the offending byte offset instead of producing a short
//! tensor.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::data::NoisyDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

fn open_checked(path: &Path, expect_len: Option<u64>) -> Result<File> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if let Some(expect) = expect_len {
        let actual = file.metadata().map_err(|e| Error::io(path, e))?.len();
        if actual < expect {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: actual,
                detail: format!("file ends at {actual} bytes, expected {expect}"),
            });
        }
    }
    Ok(file)
}

fn read_u32_be(file: &mut File, path: &Path, offset: u64) -> Result<u32> {
    let mut buf = [0u8; 4];
    file.read_exact(&mut buf).map_err(|_| Error::Format {
        path: path.to_path_buf(),
        offset,
        detail: "unexpected end of file reading header".into(),
    })?;
    Ok(u32::from_be_bytes(buf))
}

/// Read an IDX header, check the magic, and return the declared dims.
fn read_header(file: &mut File, path: &Path, magic: u32, dims: usize) -> Result<Vec<u64>> {
    let got = read_u32_be(file, path, 0)?;
    if got != magic {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            detail: format!("magic {got}, expected {magic}"),
        });
    }
    (1..=dims)
        .map(|d| read_u32_be(file, path, 4 * d as u64).map(u64::from))
        .collect()
}

/// Load an MNIST image/label pair into a clean dataset.
///
/// `limit` caps the number of samples read (headers and file sizes are still
/// validated against the full declared count).
pub fn load_mnist(
    images_path: impl Into<PathBuf>,
    labels_path: impl Into<PathBuf>,
    limit: Option<usize>,
) -> Result<NoisyDataset> {
    let images_path = images_path.into();
    let labels_path = labels_path.into();

    let mut img = open_checked(&images_path, None)?;
    let dims = read_header(&mut img, &images_path, IMAGE_MAGIC, 3)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    if (h, w) != (28, 28) {
        return Err(Error::Format {
            path: images_path.clone(),
            offset: 8,
            detail: format!("expected 28x28 images, header says {h}x{w}"),
        });
    }
    // Re-open with a size check now that we know N.
    let expected = 16 + n * h * w;
    open_checked(&images_path, Some(expected))?;

    let mut lbl = open_checked(&labels_path, None)?;
    let label_dims = read_header(&mut lbl, &labels_path, LABEL_MAGIC, 1)?;
    if label_dims[0] != n {
        return Err(Error::Data(format!(
            "{} declares {} labels but {} declares {} images",
            labels_path.display(),
            label_dims[0],
            images_path.display(),
            n
        )));
    }
    open_checked(&labels_path, Some(8 + n))?;

    let take = limit.map_or(n as usize, |l| l.min(n as usize));
    if take == 0 {
        return Err(Error::Data("requested 0 samples".into()));
    }

    let mut pixels = vec![0u8; take * 784];
    img.read_exact(&mut pixels).map_err(|_| Error::Format {
        path: images_path.clone(),
        offset: 16,
        detail: "short read of pixel data".into(),
    })?;
    let features = Tensor::new(
        vec![take, 1, 28, 28],
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;

    let mut raw_labels = vec![0u8; take];
    lbl.read_exact(&mut raw_labels).map_err(|_| Error::Format {
        path: labels_path.clone(),
        offset: 8,
        detail: "short read of label data".into(),
    })?;
    let labels: Vec<usize> = raw_labels.into_iter().map(usize::from).collect();

    NoisyDataset::new(features, labels, 10)
}
