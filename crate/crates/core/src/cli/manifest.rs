use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::data::hex;
use crate::trainer::TrainConfig;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRACE_FILE: &str = "loss_trace.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const GRID_DIR: &str = "grids";

/// `git describe`-style version of the running binary.
pub const CODE_VERSION: &str = env!("TVGAN_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub status: RunStatus,
    pub version: String,
    pub config_fingerprint: String,
    pub dataset_fingerprint: String,
    pub dataset_size: usize,
    pub started_unix: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_seconds: f64,
    pub train_seconds: f64,
    pub total_seconds: f64,
}

/// Relative paths of every artifact in a run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub trace: String,
    pub checkpoints: Vec<String>,
    pub grids: Vec<String>,
}

/// The one `manifest.toml` in every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run: RunInfo,
    pub timings: Timings,
    pub layout: Layout,
    pub config: TrainConfig,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(config: &TrainConfig, dataset_fingerprint: String, dataset_size: usize) -> Self {
        Self {
            run: RunInfo {
                status: RunStatus::Running,
                version: CODE_VERSION.to_string(),
                config_fingerprint: hex(&config.fingerprint()),
                dataset_fingerprint,
                dataset_size,
                started_unix: unix_now(),
                finished_unix: None,
                error: None,
            },
            timings: Timings::default(),
            layout: Layout {
                trace: TRACE_FILE.to_string(),
                ..Layout::default()
            },
            config: config.clone(),
        }
    }

    pub fn finish(&mut self, error: Option<String>) {
        self.run.status = if error.is_some() {
            RunStatus::Failed
        } else {
            RunStatus::Complete
        };
        self.run.error = error;
        self.run.finished_unix = Some(unix_now());
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let tmp = path.with_extension("toml.tmp");
        std::fs::write(&tmp, self.to_toml_string())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn read(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| Error::corrupt(&path, e.to_string()))
    }
}

pub fn checkpoint_name(epoch: u64) -> PathBuf {
    Path::new(CHECKPOINT_DIR).join(format!("epoch_{epoch:04}.tvgn"))
}

pub fn grid_name(epoch: u64) -> PathBuf {
    Path::new(GRID_DIR).join(format!("epoch_{epoch:04}.png"))
}
