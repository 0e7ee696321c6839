use std::path::Path;
use std::time::Instant;

use crate::data::Dataset;
use crate::seed::{derive_seed, TAG_GRID_LATENT};
use crate::trainer::{load_checkpoint, run_epochs, Checkpoint, LossTrace, TrainConfig};
use crate::{Error, Result};

use super::manifest::{checkpoint_name, grid_name, RunManifest, CHECKPOINT_DIR, GRID_DIR, TRACE_FILE};
use super::output::write_grid;

/// Tiles in every per-checkpoint sample grid.
pub const GRID_SAMPLES: usize = 16;

pub fn grid_seed(config: &TrainConfig) -> u64 {
    derive_seed(config.seed, TAG_GRID_LATENT, 0)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Where to write artifacts; `None` trains in memory only.
    pub run_dir: Option<&'a Path>,
    pub resume: Option<&'a Path>,
    pub allow_config_mismatch: bool,
    /// Time already spent loading the dataset, recorded in the manifest.
    pub load_seconds: f64,
}

pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub trace: LossTrace,
    pub manifest: RunManifest,
}

fn save_snapshot(state: &Checkpoint, run_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let ckpt = checkpoint_name(state.epoch);
    state.save(&run_dir.join(&ckpt))?;
    let grid = grid_name(state.epoch);
    write_grid(state.sample(GRID_SAMPLES, grid_seed(&state.config))?.view(), &run_dir.join(&grid))?;
    for (list, entry) in [(&mut manifest.layout.checkpoints, ckpt), (&mut manifest.layout.grids, grid)] {
        let entry = entry.to_string_lossy().replace('\\', "/");
        if !list.contains(&entry) {
            list.push(entry);
        }
    }
    manifest.write(run_dir)
}

fn prior_trace(run_dir: &Path, before_iteration: u64) -> Result<LossTrace> {
    let path = run_dir.join(TRACE_FILE);
    let mut kept = LossTrace::new();
    if before_iteration == 0 || !path.exists() {
        return Ok(kept);
    }
    let old = LossTrace::from_csv(&std::fs::read_to_string(&path)?)?;
    for r in old.records().iter().filter(|r| r.iteration < before_iteration) {
        kept.push(*r)?;
    }
    Ok(kept)
}

/// Trains under `config` and, when `run_dir` is given, maintains the run
/// directory: manifest, loss trace, and a checkpoint plus 4×4 grid at
/// epoch 0, every `checkpoint_every` epochs, and the final epoch.
pub fn train_run(config: &TrainConfig, dataset: &Dataset, options: RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let run_dir = options.run_dir;
    let mut state = match options.resume {
        Some(path) => load_checkpoint(path, config, options.allow_config_mismatch)?,
        None => Checkpoint::new(config)?,
    };
    let mut manifest = RunManifest::start(config, dataset.fingerprint(), dataset.len());
    manifest.timings.load_seconds = options.load_seconds;
    let mut history = LossTrace::new();
    if let Some(dir) = run_dir {
        std::fs::create_dir_all(dir.join(CHECKPOINT_DIR))?;
        std::fs::create_dir_all(dir.join(GRID_DIR))?;
        if let Ok(previous) = RunManifest::read(dir) {
            if options.resume.is_some() {
                manifest.layout.checkpoints = previous.layout.checkpoints;
                manifest.layout.grids = previous.layout.grids;
            }
        }
        history = prior_trace(dir, state.iteration)?;
        manifest.write(dir)?;
        if state.epoch == 0 {
            save_snapshot(&state, dir, &mut manifest)?;
        }
    }

    let every = config.checkpoint_every;
    let epochs = config.epochs;
    let train_started = Instant::now();
    let result = run_epochs(&mut state, dataset, |s, _| match run_dir {
        Some(dir) if s.epoch % every == 0 || s.epoch == epochs => save_snapshot(s, dir, &mut manifest),
        _ => Ok(()),
    });
    manifest.timings.train_seconds = train_started.elapsed().as_secs_f64();
    manifest.timings.total_seconds = options.load_seconds + started.elapsed().as_secs_f64();

    let trace = match result {
        Ok(trace) => trace,
        Err(err) => {
            if let Some(dir) = run_dir {
                if let Error::Divergence { trace, .. } = &err {
                    let mut partial = history.clone();
                    partial.extend(trace)?;
                    partial.write_csv(&dir.join(TRACE_FILE))?;
                }
                manifest.finish(Some(err.to_string()));
                manifest.write(dir)?;
            }
            return Err(err);
        }
    };
    history.extend(&trace)?;
    if let Some(dir) = run_dir {
        history.write_csv(&dir.join(TRACE_FILE))?;
        manifest.finish(None);
        manifest.write(dir)?;
    }
    Ok(RunOutcome {
        checkpoint: state,
        trace: history,
        manifest,
    })
}
