//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "TVGN"
//! version      u16
//! fingerprint  32 bytes SHA-256 of the model-defining config fields
//! config       u32 length + UTF-8 TOML of the full TrainConfig
//! epoch        u64      completed epochs
//! iteration    u64      completed generator updates
//! gen_step     u64      generator Adam step count
//! disc_step    u64      discriminator Adam step count
//! tensors      u32 count, then per tensor:
//!                u16 name length + UTF-8 name
//!                u8 rank + u32 per dimension
//!                f32 values
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array4, ArrayD, IxDyn};

use super::TrainConfig;
use crate::gan::{build_discriminator, build_generator, sample_latent, Discriminator, Generator};
use crate::nn::{Adam, Module};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TVGN";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Complete training state: both networks, both optimizers and counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub generator: Generator<f32>,
    pub discriminator: Discriminator<f32>,
    pub gen_opt: Adam<f32>,
    pub disc_opt: Adam<f32>,
    pub epoch: u64,
    pub iteration: u64,
}

impl Checkpoint {
    /// Freshly initialized state (epoch 0), deterministic in `config.seed`.
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = build_generator(config)?;
        let discriminator = build_discriminator(config)?;
        let gen_opt = Adam::new(
            config.learning_rate,
            config.adam_beta1,
            config.adam_beta2,
            generator.params().into_iter().map(|(_, p)| p),
        );
        let disc_opt = Adam::new(
            config.learning_rate,
            config.adam_beta1,
            config.adam_beta2,
            discriminator.params().into_iter().map(|(_, p)| p),
        );
        Ok(Self {
            config: config.clone(),
            generator,
            discriminator,
            gen_opt,
            disc_opt,
            epoch: 0,
            iteration: 0,
        })
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        self.config.fingerprint()
    }

    /// Draws `count` images from the generator in evaluation mode.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Array4<f32>> {
        let z = sample_latent::<f32>(count, self.config.latent_dim, seed)?;
        self.generator.forward_eval(z.view())
    }

    fn named_tensors(&self) -> Vec<(String, &ArrayD<f32>)> {
        let mut out = Vec::new();
        for (name, p) in self.generator.params() {
            out.push((format!("generator.{name}"), &p.value));
        }
        for (name, b) in self.generator.buffers() {
            out.push((format!("generator.{name}"), b));
        }
        for (name, p) in self.discriminator.params() {
            out.push((format!("discriminator.{name}"), &p.value));
        }
        for (name, b) in self.discriminator.buffers() {
            out.push((format!("discriminator.{name}"), b));
        }
        for (prefix, net, opt) in [
            ("gen_opt", self.generator.params(), &self.gen_opt),
            ("disc_opt", self.discriminator.params(), &self.disc_opt),
        ] {
            for (i, (name, _)) in net.into_iter().enumerate() {
                out.push((format!("{prefix}.m.{name}"), &opt.first_moment[i]));
                out.push((format!("{prefix}.v.{name}"), &opt.second_moment[i]));
            }
        }
        out
    }

    fn visit_tensors_mut(&mut self, mut f: impl FnMut(String, &mut ArrayD<f32>) -> Result<()>) -> Result<()> {
        let gen_names: Vec<String> = self.generator.params().into_iter().map(|(n, _)| n).collect();
        let disc_names: Vec<String> = self.discriminator.params().into_iter().map(|(n, _)| n).collect();
        for (name, p) in self.generator.params_mut() {
            f(format!("generator.{name}"), &mut p.value)?;
        }
        for (name, b) in self.generator.buffers_mut() {
            f(format!("generator.{name}"), b)?;
        }
        for (name, p) in self.discriminator.params_mut() {
            f(format!("discriminator.{name}"), &mut p.value)?;
        }
        for (name, b) in self.discriminator.buffers_mut() {
            f(format!("discriminator.{name}"), b)?;
        }
        for (prefix, names, opt) in [
            ("gen_opt", &gen_names, &mut self.gen_opt),
            ("disc_opt", &disc_names, &mut self.disc_opt),
        ] {
            for ((name, m), v) in names
                .iter()
                .zip(opt.first_moment.iter_mut())
                .zip(opt.second_moment.iter_mut())
            {
                f(format!("{prefix}.m.{name}"), m)?;
                f(format!("{prefix}.v.{name}"), v)?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.fingerprint());
        let config = self.config.to_toml_string();
        buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
        buf.extend_from_slice(config.as_bytes());
        for v in [self.epoch, self.iteration, self.gen_opt.step, self.disc_opt.step] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let tensors = self.named_tensors();
        buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in tensors {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.push(t.ndim() as u8);
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    /// Parses a checkpoint; `origin` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, origin };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::corrupt(origin, "missing TVGN magic"));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let fingerprint: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let config_len = r.u32()? as usize;
        let config_text = std::str::from_utf8(r.take(config_len)?)
            .map_err(|_| Error::corrupt(origin, "config block is not UTF-8"))?;
        let config = TrainConfig::from_toml_str(config_text)
            .map_err(|e| Error::corrupt(origin, format!("embedded config: {e}")))?;
        if config.fingerprint() != fingerprint {
            return Err(Error::corrupt(origin, "header fingerprint does not match embedded config"));
        }
        let mut state = Checkpoint::new(&config)?;
        state.epoch = r.u64()?;
        state.iteration = r.u64()?;
        state.gen_opt.step = r.u64()?;
        state.disc_opt.step = r.u64()?;

        let count = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::corrupt(origin, "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let raw = r.take(len.checked_mul(4).ok_or_else(|| Error::corrupt(origin, "tensor too large"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = ArrayD::from_shape_vec(IxDyn(&shape), data).expect("length matches shape");
            if tensors.insert(name.clone(), t).is_some() {
                return Err(Error::corrupt(origin, format!("duplicate tensor `{name}`")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::corrupt(origin, "trailing bytes after tensor table"));
        }
        state.visit_tensors_mut(|name, slot| {
            let t = tensors
                .remove(&name)
                .ok_or_else(|| Error::corrupt(origin, format!("missing tensor `{name}`")))?;
            if t.shape() != slot.shape() {
                return Err(Error::corrupt(
                    origin,
                    format!("tensor `{name}` has shape {:?}, expected {:?}", t.shape(), slot.shape()),
                ));
            }
            *slot = t;
            Ok(())
        })?;
        if let Some(extra) = tensors.keys().next() {
            return Err(Error::corrupt(origin, format!("unexpected tensor `{extra}`")));
        }
        Ok(state)
    }

    /// Writes atomically: a temporary sibling file is renamed into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tvgn.tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, path)
    }
}

pub fn save_checkpoint(state: &Checkpoint, path: &Path) -> Result<()> {
    state.save(path)
}

/// Loads a checkpoint to continue training under `config`.
///
/// The checkpoint must have been written by a configuration with the same
/// fingerprint unless `allow_mismatch` is set. The returned state adopts
/// `config`, so run-length fields such as `epochs` come from the caller.
pub fn load_checkpoint(path: &Path, config: &TrainConfig, allow_mismatch: bool) -> Result<Checkpoint> {
    let mut state = Checkpoint::load(path)?;
    if state.fingerprint() != config.fingerprint() {
        if !allow_mismatch {
            return Err(Error::FingerprintMismatch);
        }
        log::warn!("loading {} despite a config fingerprint mismatch", path.display());
    }
    config.validate()?;
    if config.image_size != state.config.image_size
        || config.base_width != state.config.base_width
        || config.latent_dim != state.config.latent_dim
    {
        return Err(Error::Config("checkpoint architecture differs from the requested config".into()));
    }
    state.gen_opt.learning_rate = config.learning_rate;
    state.gen_opt.beta1 = config.adam_beta1;
    state.gen_opt.beta2 = config.adam_beta2;
    state.disc_opt.learning_rate = config.learning_rate;
    state.disc_opt.beta1 = config.adam_beta1;
    state.disc_opt.beta2 = config.adam_beta2;
    state.config = config.clone();
    Ok(state)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::corrupt(self.origin, "unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
