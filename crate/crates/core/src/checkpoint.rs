//! Bit-exact training snapshots.
//!
//! A checkpoint holds everything needed to resume a run mid-flight and land
//! on the *same* trajectory: the trained architecture, every model's
//! parameters and optimizer state, the epoch cursor, and the run seed. All
//! per-epoch randomness (shuffles, dropout masks) is derived from the run
//! seed plus epoch/batch counters, so the seed *is* the RNG state — nothing
//! stream-positional needs saving.
//!
//! # Byte layout (version 1)
//!
//! All integers little-endian; `f64` stored as its IEEE-754 bit pattern
//! (`to_le_bytes`), so round-trips are bit-exact.
//!
//! ```text
//! magic        8  b"DSELCKPT"
//! version      u32 = 1
//! run_seed     u64
//! next_epoch   u64
//! spec:
//!   input rank u32, dims u64×rank
//!   class_count u64
//!   layer_count u32, then per layer a tag u8 + fields:
//!     0 Dense     width u64
//!     1 Conv2d    channels u64, kernel u64, stride u64
//!     2 MaxPool2x2
//!     3 Relu
//!     4 Softsign
//!     5 Dropout   p f64
//! model_count  u32, then per model:
//!   params       (tensor-map encoding below)
//!   optimizer:
//!     rule tag u8: 0 SgdMomentum(momentum f64)
//!                  1 AdaptiveMoments(beta1 f64, beta2 f64, epsilon f64)
//!     learning_rate f64, lr_scale f64, step u64
//!     moments1, moments2 (tensor-map encoding)
//!
//! tensor-map encoding:
//!   entry_count u32, then per entry:
//!     layer u64
//!     weight: rank u32, dims u64×rank, data f64×len
//!     bias:   rank u32, dims u64×rank, data f64×len
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::net::{LayerParams, LayerSpec, NetworkSpec, OptimRule, OptimizerState, Parameters};
use crate::tensor::Tensor;
use crate::trainers::{ModelState, Trainer, TrainerConfig};

const MAGIC: &[u8; 8] = b"DSELCKPT";
const VERSION: u32 = 1;

/// A saved training run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub models: Vec<ModelState>,
    /// The next epoch the resumed run will execute.
    pub next_epoch: usize,
    pub run_seed: u64,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer) -> Checkpoint {
        Checkpoint {
            spec: trainer.spec().clone(),
            models: trainer.models().to_vec(),
            next_epoch: trainer.next_epoch(),
            run_seed: trainer.cfg().seed,
        }
    }

    /// Rebuild a trainer from this snapshot. `cfg` must carry the same run
    /// seed the checkpoint was taken under — resuming under a different
    /// seed would silently fork the mask/shuffle streams.
    pub fn into_trainer(self, cfg: TrainerConfig) -> Result<Trainer> {
        if cfg.seed != self.run_seed {
            return Err(Error::Config(format!(
                "checkpoint was taken under run seed {}, config says {}",
                self.run_seed, cfg.seed
            )));
        }
        Trainer::resume(cfg, self.spec, self.models, self.next_epoch)
    }

    pub fn save(&self, path: impl Into<PathBuf>) -> Result<()> {
        let path = path.into();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u64(&mut out, self.run_seed);
        put_u64(&mut out, self.next_epoch as u64);
        encode_spec(&mut out, &self.spec);
        put_u32(&mut out, self.models.len() as u32);
        for model in &self.models {
            encode_params(&mut out, &model.params);
            encode_optimizer(&mut out, &model.optimizer);
        }
        atomic_write(&path, &out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut r = Reader {
            bytes: &bytes,
            pos: 0,
            path,
        };

        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(r.format_at(0, "not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.format_at(8, format!("unsupported checkpoint version {version}")));
        }
        let run_seed = r.u64()?;
        let next_epoch = r.u64()? as usize;
        let spec = decode_spec(&mut r)?;
        let model_count = r.u32()? as usize;
        if model_count == 0 || model_count > 2 {
            return Err(r.format(format!("implausible model count {model_count}")));
        }
        let mut models = Vec::with_capacity(model_count);
        for _ in 0..model_count {
            let params = decode_params(&mut r)?;
            check_params_match_spec(&spec, &params, path)?;
            let optimizer = decode_optimizer(&mut r, &params)?;
            models.push(ModelState { params, optimizer });
        }
        if r.pos != bytes.len() {
            return Err(r.format(format!(
                "{} trailing bytes after checkpoint payload",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            spec,
            models,
            next_epoch,
            run_seed,
        })
    }
}

/// Write `bytes` to `path` atomically: a temporary sibling file is written
/// and fsync'd, then renamed over the target, so readers never observe a
/// half-written file.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            path.with_file_name(n)
        }
        None => return Err(Error::Config(format!("cannot write to {}", path.display()))),
    };
    (|| {
        use std::io::Write;
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        drop(f);
        std::fs::rename(&tmp, path)
    })()
    .map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- encoding

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn encode_shape(out: &mut Vec<u8>, shape: &[usize]) {
    put_u32(out, shape.len() as u32);
    for &d in shape {
        put_u64(out, d as u64);
    }
}

fn encode_tensor(out: &mut Vec<u8>, t: &Tensor) {
    encode_shape(out, t.shape());
    for &v in t.data() {
        put_f64(out, v);
    }
}

fn encode_spec(out: &mut Vec<u8>, spec: &NetworkSpec) {
    encode_shape(out, spec.input_shape());
    put_u64(out, spec.class_count() as u64);
    put_u32(out, spec.layers().len() as u32);
    for layer in spec.layers() {
        match *layer {
            LayerSpec::Dense { width } => {
                out.push(0);
                put_u64(out, width as u64);
            }
            LayerSpec::Conv2d {
                channels,
                kernel,
                stride,
            } => {
                out.push(1);
                put_u64(out, channels as u64);
                put_u64(out, kernel as u64);
                put_u64(out, stride as u64);
            }
            LayerSpec::MaxPool2x2 => out.push(2),
            LayerSpec::Relu => out.push(3),
            LayerSpec::Softsign => out.push(4),
            LayerSpec::Dropout { p } => {
                out.push(5);
                put_f64(out, p);
            }
        }
    }
}

fn encode_params(out: &mut Vec<u8>, params: &Parameters) {
    put_u32(out, params.layer_indices().len() as u32);
    for (layer, lp) in params.iter() {
        put_u64(out, layer as u64);
        encode_tensor(out, &lp.weight);
        encode_tensor(out, &lp.bias);
    }
}

fn encode_optimizer(out: &mut Vec<u8>, opt: &OptimizerState) {
    match opt.rule {
        OptimRule::SgdMomentum { momentum } => {
            out.push(0);
            put_f64(out, momentum);
        }
        OptimRule::AdaptiveMoments {
            beta1,
            beta2,
            epsilon,
        } => {
            out.push(1);
            put_f64(out, beta1);
            put_f64(out, beta2);
            put_f64(out, epsilon);
        }
    }
    put_f64(out, opt.learning_rate);
    put_f64(out, opt.lr_scale());
    put_u64(out, opt.step_count());
    let (m1, m2) = opt.moments();
    encode_params(out, m1);
    encode_params(out, m2);
}

// ---------------------------------------------------------------- decoding

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.format("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn format(&self, detail: impl Into<String>) -> Error {
        self.format_at(self.pos as u64, detail)
    }

    fn format_at(&self, offset: u64, detail: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset,
            detail: detail.into(),
        }
    }

    fn shape(&mut self) -> Result<Vec<usize>> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(self.format(format!("implausible tensor rank {rank}")));
        }
        (0..rank).map(|_| Ok(self.u64()? as usize)).collect()
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let shape = self.shape()?;
        let len: usize = shape.iter().product();
        if len > (1 << 31) {
            return Err(self.format(format!("implausible tensor of {len} elements")));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(self.f64()?);
        }
        Tensor::new(shape, data)
    }
}

fn decode_spec(r: &mut Reader) -> Result<NetworkSpec> {
    let input_shape = r.shape()?;
    let class_count = r.u64()? as usize;
    let layer_count = r.u32()? as usize;
    if layer_count > 1024 {
        return Err(r.format(format!("implausible layer count {layer_count}")));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = r.u8()?;
        layers.push(match tag {
            0 => LayerSpec::Dense {
                width: r.u64()? as usize,
            },
            1 => LayerSpec::Conv2d {
                channels: r.u64()? as usize,
                kernel: r.u64()? as usize,
                stride: r.u64()? as usize,
            },
            2 => LayerSpec::MaxPool2x2,
            3 => LayerSpec::Relu,
            4 => LayerSpec::Softsign,
            5 => LayerSpec::Dropout { p: r.f64()? },
            other => return Err(r.format(format!("unknown layer tag {other}"))),
        });
    }
    // NetworkSpec::new re-validates the whole shape chain, so a tampered
    // file cannot produce an inconsistent architecture.
    NetworkSpec::new(layers, input_shape, class_count)
}

fn decode_params(r: &mut Reader) -> Result<Parameters> {
    let count = r.u32()? as usize;
    if count > 1024 {
        return Err(r.format(format!("implausible parameter entry count {count}")));
    }
    let mut map = std::collections::BTreeMap::new();
    for _ in 0..count {
        let layer = r.u64()? as usize;
        let weight = r.tensor()?;
        let bias = r.tensor()?;
        if map.insert(layer, LayerParams { weight, bias }).is_some() {
            return Err(r.format(format!("duplicate parameter entry for layer {layer}")));
        }
    }
    Ok(Parameters::new(map))
}

fn decode_optimizer(r: &mut Reader, params: &Parameters) -> Result<OptimizerState> {
    let rule = match r.u8()? {
        0 => OptimRule::SgdMomentum { momentum: r.f64()? },
        1 => OptimRule::AdaptiveMoments {
            beta1: r.f64()?,
            beta2: r.f64()?,
            epsilon: r.f64()?,
        },
        other => return Err(r.format(format!("unknown optimizer rule tag {other}"))),
    };
    let learning_rate = r.f64()?;
    let lr_scale = r.f64()?;
    let step = r.u64()?;
    let moments1 = decode_params(r)?;
    let moments2 = decode_params(r)?;
    params.check_congruent(&moments1, "checkpoint optimizer moments1")?;
    params.check_congruent(&moments2, "checkpoint optimizer moments2")?;
    Ok(OptimizerState::from_parts(
        rule,
        learning_rate,
        lr_scale,
        step,
        moments1,
        moments2,
    ))
}

/// Every parameterized spec layer must have a parameter entry of the right
/// shape, and nothing else may be present.
fn check_params_match_spec(spec: &NetworkSpec, params: &Parameters, path: &Path) -> Result<()> {
    let mismatch = |detail: String| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        detail,
    };
    let expected = spec.parameterized_layers();
    if params.layer_indices() != expected {
        return Err(mismatch(format!(
            "parameter entries at layers {:?} but the architecture trains layers {:?}",
            params.layer_indices(),
            expected
        )));
    }
    for i in expected {
        let lp = params.get(i).expect("checked above");
        let (w_shape, b_shape): (Vec<usize>, Vec<usize>) = match spec.layers()[i] {
            LayerSpec::Dense { width } => {
                (vec![width, spec.width_before(i)], vec![width])
            }
            LayerSpec::Conv2d {
                channels, kernel, ..
            } => {
                let in_c = spec.shape_before(i)[0];
                (vec![channels, in_c, kernel, kernel], vec![channels])
            }
            _ => unreachable!("parameterized layers are dense or conv"),
        };
        if lp.weight.shape() != w_shape.as_slice() || lp.bias.shape() != b_shape.as_slice() {
            return Err(mismatch(format!(
                "layer {i} parameters have shapes {:?}/{:?}, architecture expects {w_shape:?}/{b_shape:?}",
                lp.weight.shape(),
                lp.bias.shape()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_blobs;
    use crate::net::presets;
    use crate::trainers::Algorithm;

    fn trained_trainer(algorithm: Algorithm, epochs: usize) -> Trainer {
        let base = presets::blob_mlp(3, 2, &[5]).unwrap();
        let mut cfg = TrainerConfig::new(algorithm, 31);
        cfg.batch_size = 8;
        cfg.max_epochs = 10;
        cfg.ramp_epochs = 2;
        cfg.warmup_epochs = 1;
        cfg.tau = 0.2;
        cfg.dropout_p = if algorithm.uses_dropout_net() { 0.4 } else { 0.0 };
        let mut trainer = Trainer::new(&base, cfg).unwrap();
        let train = synthetic_blobs(2, 12, 3, 3.0, 7, false).unwrap();
        let test = synthetic_blobs(2, 12, 3, 3.0, 7, true).unwrap();
        for _ in 0..epochs {
            trainer.run_epoch(&train, &test).unwrap();
        }
        trainer
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let trainer = trained_trainer(Algorithm::CoteachingPlusOurs, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        Checkpoint::from_trainer(&trainer).save(&path).unwrap();

        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.next_epoch, 3);
        assert_eq!(loaded.run_seed, 31);
        assert_eq!(loaded.spec.layers(), trainer.spec().layers());
        for (a, b) in loaded.models.iter().zip(trainer.models()) {
            for ((_, x), (_, y)) in a.params.iter().zip(b.params.iter()) {
                assert_eq!(x.weight.data(), y.weight.data());
                assert_eq!(x.bias.data(), y.bias.data());
            }
            assert_eq!(a.optimizer, b.optimizer);
        }

        // Re-encoding the loaded checkpoint reproduces the file bytes.
        let path2 = dir.path().join("again.ckpt");
        loaded.save(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    /// Stopping, saving, loading, and resuming lands on the identical
    /// trajectory as training straight through.
    #[test]
    fn resume_continues_the_exact_trajectory() {
        for algorithm in [Algorithm::JocorOurs, Algorithm::Coteaching] {
            let mut straight = trained_trainer(algorithm, 2);
            let interrupted = trained_trainer(algorithm, 2);

            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("mid.ckpt");
            Checkpoint::from_trainer(&interrupted).save(&path).unwrap();
            let mut resumed = Checkpoint::load(&path)
                .unwrap()
                .into_trainer(interrupted.cfg().clone())
                .unwrap();

            let train = synthetic_blobs(2, 12, 3, 3.0, 7, false).unwrap();
            let test = synthetic_blobs(2, 12, 3, 3.0, 7, true).unwrap();
            for _ in 0..2 {
                let a = straight.run_epoch(&train, &test).unwrap();
                let b = resumed.run_epoch(&train, &test).unwrap();
                assert_eq!(a, b, "{algorithm}");
            }
            for (a, b) in straight.models().iter().zip(resumed.models()) {
                for ((_, x), (_, y)) in a.params.iter().zip(b.params.iter()) {
                    assert_eq!(x.weight.data(), y.weight.data());
                    assert_eq!(x.bias.data(), y.bias.data());
                }
            }
        }
    }

    #[test]
    fn rejects_foreign_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.ckpt");

        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        match Checkpoint::load(&path).unwrap_err() {
            Error::Format { offset, detail, .. } => {
                assert_eq!(offset, 0);
                assert!(detail.contains("magic"), "{detail}");
            }
            other => panic!("unexpected {other}"),
        }

        let trainer = trained_trainer(Algorithm::BaselineCe, 1);
        let good = dir.path().join("good.ckpt");
        Checkpoint::from_trainer(&trainer).save(&good).unwrap();
        let bytes = std::fs::read(&good).unwrap();

        // Truncation is caught with an offset.
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap_err().class(), "data");

        // Version bump is refused.
        let mut tampered = bytes.clone();
        tampered[8] = 99;
        std::fs::write(&path, &tampered).unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn resume_refuses_a_different_run_seed() {
        let trainer = trained_trainer(Algorithm::BaselineCe, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        Checkpoint::from_trainer(&trainer).save(&path).unwrap();
        let mut cfg = trainer.cfg().clone();
        cfg.seed = 999;
        let err = Checkpoint::load(&path).unwrap().into_trainer(cfg).unwrap_err();
        assert_eq!(err.class(), "config");
    }

    #[test]
    fn atomic_write_replaces_not_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("file.bin");
        atomic_write(&path, b"first version, longer").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        // No stray temporary left behind.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
