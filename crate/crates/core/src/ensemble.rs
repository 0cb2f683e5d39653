//! The dropout-instance machinery.
//!
//! A base network is transformed into a "DropoutNet" in two steps: widen
//! every hidden layer by `1/(1−p)` (ceil-rounded), then insert a dropout
//! site in front of each dense layer (or one penultimate site if the network
//! has at most one dense layer). Fixing a [`DropoutMaskSet`] then selects
//! one sub-network *instance* out of the exponentially many the widened
//! network contains; instances play the role that separate peer networks
//! play in two-model noisy-label algorithms.
//!
//! Masks are sampled once per mini-batch iteration and shared across the
//! samples in the batch, so "the instance" is well-defined for a whole
//! forward pass.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::net::{LayerSpec, NetworkSpec};
use crate::rng::SplitMix64;

/// Per-site boolean retain vectors, keyed by dropout layer index, plus the
/// seed that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMaskSet {
    masks: BTreeMap<usize, Vec<bool>>,
    seed: u64,
}

impl DropoutMaskSet {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Retain vector for the dropout layer at `layer`, if one exists.
    pub fn site(&self, layer: usize) -> Option<&[bool]> {
        self.masks.get(&layer).map(|v| v.as_slice())
    }

    pub fn site_indices(&self) -> Vec<usize> {
        self.masks.keys().copied().collect()
    }

    /// Number of retained units at each site, in layer order.
    pub fn retained_counts(&self) -> Vec<usize> {
        self.masks
            .values()
            .map(|m| m.iter().filter(|&&b| b).count())
            .collect()
    }

    /// An all-retain mask set for `spec` (the p=0 instance). Usable whenever
    /// a mask set is required but dropout should be inert.
    pub fn all_retain(spec: &NetworkSpec, seed: u64) -> DropoutMaskSet {
        DropoutMaskSet {
            masks: spec
                .dropout_sites()
                .into_iter()
                .map(|(i, _, width)| (i, vec![true; width]))
                .collect(),
            seed,
        }
    }

    /// Test-only escape hatch for building explicit masks; production code
    /// always goes through [`sample_mask_set`] or [`DropoutMaskSet::all_retain`].
    #[cfg(test)]
    pub(crate) fn from_parts_for_tests(masks: BTreeMap<usize, Vec<bool>>, seed: u64) -> Self {
        DropoutMaskSet { masks, seed }
    }

    /// Error unless this mask set's sites exactly match `spec`'s dropout
    /// sites (indices and widths).
    pub fn check_matches(&self, spec: &NetworkSpec) -> Result<()> {
        let sites = spec.dropout_sites();
        if sites.len() != self.masks.len()
            || !sites.iter().map(|(i, _, _)| i).eq(self.masks.keys())
        {
            return Err(Error::Mask(format!(
                "mask sites {:?} do not match spec dropout sites {:?}",
                self.site_indices(),
                sites.iter().map(|(i, _, _)| *i).collect::<Vec<_>>()
            )));
        }
        for (i, _, width) in sites {
            let got = self.masks[&i].len();
            if got != width {
                return Err(Error::Mask(format!(
                    "site {i}: mask width {got}, spec width {width}"
                )));
            }
        }
        Ok(())
    }
}

/// One line of a widening report: what happened to each resized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct WidenEntry {
    pub layer: usize,
    pub kind: &'static str,
    pub original: usize,
    pub widened: usize,
}

/// Record of a [`widen_spec`] application, serialized into run manifests so
/// the parameter-count cost of the transformation stays visible.
#[derive(Debug, Clone, PartialEq)]
pub struct WidenReport {
    pub p: f64,
    /// Exact widening factor 1/(1−p) before rounding.
    pub factor: f64,
    pub entries: Vec<WidenEntry>,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    Ok(())
}

/// `ceil(width / (1−p))` with a small epsilon guard so that exactly-integer
/// quotients are not pushed up by the floating-point representation of
/// `1−p` (e.g. 21/0.7 must stay 30, and 256/0.3 must become 854).
fn widen_width(width: usize, p: f64) -> usize {
    let exact = width as f64 / (1.0 - p);
    (exact - 1e-9).ceil() as usize
}

/// Widen every hidden dense width and every conv channel count by
/// `1/(1−p)`, ceil-rounded. The input shape and the terminal classifier
/// width are unchanged.
pub fn widen_spec(spec: &NetworkSpec, p: f64) -> Result<(NetworkSpec, WidenReport)> {
    check_p(p)?;
    let last = spec.layers().len() - 1;
    let mut entries = Vec::new();
    let layers = spec
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| match layer {
            LayerSpec::Dense { width } if i != last => {
                let widened = widen_width(*width, p);
                entries.push(WidenEntry {
                    layer: i,
                    kind: "dense",
                    original: *width,
                    widened,
                });
                LayerSpec::Dense { width: widened }
            }
            LayerSpec::Conv2d {
                channels,
                kernel,
                stride,
            } => {
                let widened = widen_width(*channels, p);
                entries.push(WidenEntry {
                    layer: i,
                    kind: "conv2d",
                    original: *channels,
                    widened,
                });
                LayerSpec::Conv2d {
                    channels: widened,
                    kernel: *kernel,
                    stride: *stride,
                }
            }
            other => other.clone(),
        })
        .collect();
    let widened = NetworkSpec::new(layers, spec.input_shape().to_vec(), spec.class_count())?;
    Ok((
        widened,
        WidenReport {
            p,
            factor: 1.0 / (1.0 - p),
            entries,
        },
    ))
}

/// Insert dropout sites: one immediately before each dense layer when the
/// network has two or more dense layers, otherwise exactly one site at the
/// penultimate position. Idempotent — positions already preceded by a
/// dropout site are left alone (regardless of that site's own p).
pub fn insert_dropout(spec: &NetworkSpec, p: f64) -> Result<NetworkSpec> {
    check_p(p)?;
    let dense_count = spec
        .layers()
        .iter()
        .filter(|l| matches!(l, LayerSpec::Dense { .. }))
        .count();
    let mut layers: Vec<LayerSpec> = Vec::with_capacity(spec.layers().len() + dense_count.max(1));
    if dense_count >= 2 {
        for layer in spec.layers() {
            if matches!(layer, LayerSpec::Dense { .. })
                && !matches!(layers.last(), Some(LayerSpec::Dropout { .. }))
            {
                layers.push(LayerSpec::Dropout { p });
            }
            layers.push(layer.clone());
        }
    } else {
        layers.extend_from_slice(spec.layers());
        let at = layers.len() - 1;
        if at == 0 || !matches!(layers[at - 1], LayerSpec::Dropout { .. }) {
            layers.insert(at, LayerSpec::Dropout { p });
        }
    }
    NetworkSpec::new(layers, spec.input_shape().to_vec(), spec.class_count())
}

/// Sample a fresh mask set for `spec`'s dropout sites.
///
/// Each unit is retained independently with probability `1−p` (retain iff
/// the site stream's next uniform draw is `≥ p`). Sites are visited in
/// ascending layer order, each with its own sub-stream
/// `SplitMix64(derive(seed, [site_ordinal]))`, so inserting activations
/// elsewhere never shifts a site's draws. A site that comes out all-dropped
/// is resampled with an incremented sub-seed tag until at least one unit
/// survives.
pub fn sample_mask_set(spec: &NetworkSpec, seed: u64) -> Result<DropoutMaskSet> {
    let sites = spec.dropout_sites();
    if sites.is_empty() {
        return Err(Error::Config(
            "cannot sample masks: network has no dropout sites".into(),
        ));
    }
    let mut masks = BTreeMap::new();
    for (ordinal, (layer, p, width)) in sites.into_iter().enumerate() {
        let mut attempt: u64 = 0;
        let mask = loop {
            let sub = crate::rng::derive(seed, &[ordinal as u64, attempt]);
            let mut stream = SplitMix64::new(sub);
            let mask: Vec<bool> = (0..width).map(|_| stream.next_f64() >= p).collect();
            if mask.iter().any(|&b| b) {
                break mask;
            }
            attempt += 1;
        };
        masks.insert(layer, mask);
    }
    Ok(DropoutMaskSet { masks, seed })
}

/// The full transformation: widen by `1/(1−p)`, then insert dropout sites.
pub fn make_dropoutnet(base: &NetworkSpec, p: f64) -> Result<(NetworkSpec, WidenReport)> {
    let (widened, report) = widen_spec(base, p)?;
    Ok((insert_dropout(&widened, p)?, report))
}
