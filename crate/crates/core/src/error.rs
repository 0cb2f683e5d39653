//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. The variants are
//! grouped by what the caller can do about them: `Config` means the request
//! itself was malformed, `Shape`/`Mask` mean two pieces of in-memory state
//! disagree, `Data`/`Format`/`Io` are dataset problems, and `NonFinite` means
//! a numeric invariant broke mid-computation (the run should abort rather
//! than continue with poisoned values).

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or parameter shape does not match what a layer expects.
    /// `layer` is the index into the network's layer list (the network input
    /// is reported as layer 0's input).
    #[error("shape mismatch at layer {layer}: {detail}")]
    Shape { layer: usize, detail: String },

    /// A request was structurally invalid: bad hyperparameter range, an
    /// architecture that cannot be built, a malformed config file, and so on.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A label lies outside `0..class_count`.
    #[error("label {label} out of range for {class_count} classes (sample {sample})")]
    LabelRange {
        sample: usize,
        label: usize,
        class_count: usize,
    },

    /// A mask set was paired with a trace or network it was not sampled for.
    #[error("dropout mask mismatch: {0}")]
    Mask(String),

    /// A NaN or infinity appeared where finite values are required.
    /// `context` pins down where (e.g. "loss at epoch 3, batch 17").
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A dataset is semantically unusable (empty, inconsistent counts, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A dataset file exists but its bytes do not match the expected format.
    #[error("{}: format error at byte {offset}: {detail}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    /// An OS-level I/O failure, tagged with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Convenience constructor for shape errors.
    pub fn shape(layer: usize, detail: impl Into<String>) -> Self {
        Error::Shape {
            layer,
            detail: detail.into(),
        }
    }

    /// Convenience constructor for I/O errors.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class, used by the CLI for exit codes and by
    /// tests that assert on error categories.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) | Error::Format { .. } | Error::LabelRange { .. } => "data",
            Error::Io { .. } => "io",
            Error::Shape { .. } | Error::Mask(_) | Error::NonFinite { .. } => "numeric",
        }
    }
}
