use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DataSource, DatasetSpec, SynthClassParams};
use crate::gan::SUPPORTED_IMAGE_SIZES;
use crate::{Error, Result};

/// Every training hyperparameter plus the data source.
///
/// Defaults follow the reference protocol: 100 epochs, batch 40, 4 workers,
/// Adam at lr 0.0002 with β₁ = 0.5, a 100-dimensional latent and 64×64
/// images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub workers: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub latent_dim: usize,
    pub lambda_tv: f64,
    pub image_size: usize,
    /// Width `b` of the narrowest hidden stage; the widest is `8b` at 64×64.
    pub base_width: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub synthetic_count: usize,
    pub synthetic: SynthClassParams,
}

pub const DEFAULT_LAMBDA_TV: f64 = 1e-4;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 40,
            workers: 4,
            learning_rate: 0.0002,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            latent_dim: 100,
            lambda_tv: DEFAULT_LAMBDA_TV,
            image_size: 64,
            base_width: 64,
            seed: 0,
            checkpoint_every: 10,
            data_dir: None,
            synthetic_count: 2000,
            synthetic: SynthClassParams::default(),
        }
    }
}

/// Top-level keys accepted in a config file.
pub const CONFIG_KEYS: [&str; 15] = [
    "epochs",
    "batch_size",
    "workers",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "latent_dim",
    "lambda_tv",
    "image_size",
    "base_width",
    "seed",
    "checkpoint_every",
    "data_dir",
    "synthetic_count",
    "synthetic",
];

/// Keys accepted inside the `[synthetic]` table.
pub const SYNTHETIC_KEYS: [&str; 10] = [
    "line_count_min",
    "line_count_max",
    "thickness_min",
    "thickness_max",
    "curvature_min",
    "curvature_max",
    "background_amplitude",
    "foreground_level",
    "background_level",
    "class_seed",
];

fn unknown_key(key: &str, valid: &[&str]) -> Error {
    Error::Config(format!("unknown config key `{key}`; valid keys: {}", valid.join(", ")))
}

fn check_keys(table: &toml::Table) -> Result<()> {
    for (key, value) in table {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(unknown_key(key, &CONFIG_KEYS));
        }
        if key == "synthetic" {
            let sub = value
                .as_table()
                .ok_or_else(|| Error::Config("`synthetic` must be a table".into()))?;
            for k in sub.keys() {
                if !SYNTHETIC_KEYS.contains(&k.as_str()) {
                    return Err(unknown_key(&format!("synthetic.{k}"), &SYNTHETIC_KEYS));
                }
            }
        }
    }
    Ok(())
}

impl TrainConfig {
    /// The CPU-sized protocol: 32×32 synthetic images, 10 epochs, batch 40,
    /// single-threaded data loading.
    pub fn desk_scale() -> Self {
        Self {
            epochs: 10,
            workers: 0,
            image_size: 32,
            base_width: 16,
            checkpoint_every: 5,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        check_keys(&table)?;
        let config: TrainConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one key from its textual value. Keys may use `kebab-case` and
    /// address the synthetic block as `synthetic.<key>`.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let mut table = toml::Table::try_from(&*self).expect("config serializes");
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let (slot, name) = match key.split_once('.') {
            Some(("synthetic", sub)) => {
                if !SYNTHETIC_KEYS.contains(&sub) {
                    return Err(unknown_key(&key, &SYNTHETIC_KEYS));
                }
                let t = table
                    .get_mut("synthetic")
                    .and_then(|v| v.as_table_mut())
                    .expect("synthetic table");
                (t, sub.to_string())
            }
            _ => {
                if !CONFIG_KEYS.contains(&key.as_str()) || key == "synthetic" {
                    return Err(unknown_key(&key, &CONFIG_KEYS));
                }
                (&mut table, key.clone())
            }
        };
        let parsed = match (slot.get(&name), parsed) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (Some(toml::Value::String(_)), toml::Value::Integer(i)) => toml::Value::String(i.to_string()),
            (_, v) => v,
        };
        slot.insert(name, parsed);
        *self = Self::from_table(table)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {beta}"));
            }
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1".into());
        }
        if !(self.lambda_tv >= 0.0 && self.lambda_tv.is_finite()) {
            return bad(format!("lambda_tv must be finite and >= 0, got {}", self.lambda_tv));
        }
        if !SUPPORTED_IMAGE_SIZES.contains(&self.image_size) {
            return bad(format!(
                "unsupported image_size {} (supported: {SUPPORTED_IMAGE_SIZES:?})",
                self.image_size
            ));
        }
        if self.base_width == 0 {
            return bad("base_width must be >= 1".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be >= 1".into());
        }
        if self.data_dir.is_none() {
            if self.synthetic_count == 0 {
                return bad("synthetic_count must be >= 1".into());
            }
            self.synthetic.validate(self.image_size)?;
        }
        Ok(())
    }

    /// SHA-256 over the fields that determine model shapes, initialization
    /// and optimization. Run-length and I/O fields (`epochs`, `workers`,
    /// `checkpoint_every`, data source) are excluded so a run can be resumed
    /// with a longer schedule.
    pub fn fingerprint(&self) -> [u8; 32] {
        let canonical = format!(
            "tvgan-config-v1;batch_size={};learning_rate={:016x};adam_beta1={:016x};adam_beta2={:016x};\
             latent_dim={};lambda_tv={:016x};image_size={};base_width={};seed={}",
            self.batch_size,
            self.learning_rate.to_bits(),
            self.adam_beta1.to_bits(),
            self.adam_beta2.to_bits(),
            self.latent_dim,
            self.lambda_tv.to_bits(),
            self.image_size,
            self.base_width,
            self.seed,
        );
        Sha256::digest(canonical.as_bytes()).into()
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        let source = match &self.data_dir {
            Some(dir) => DataSource::Directory(dir.clone()),
            None => DataSource::Synthetic {
                count: self.synthetic_count,
                params: self.synthetic.clone(),
            },
        };
        DatasetSpec {
            source,
            image_size: self.image_size,
            shuffle_seed: self.seed,
            workers: self.workers,
        }
    }
}
