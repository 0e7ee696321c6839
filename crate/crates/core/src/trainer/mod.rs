//! Alternating minimax training.
//!
//! Each iteration takes one discriminator step on a real batch and a freshly
//! generated (detached) fake batch, then one generator step on a new latent
//! batch minimizing `g_adv + lambda_tv · g_tv`. Every random draw is keyed by
//! `(seed, iteration)` or `(seed, epoch)`, so a run resumed from a
//! checkpoint replays exactly the draws an uninterrupted run would make.

mod checkpoint;
mod config;
mod trace;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{TrainConfig, CONFIG_KEYS, DEFAULT_LAMBDA_TV, SYNTHETIC_KEYS};
pub use trace::{LossTrace, TraceRecord, TRACE_CSV_HEADER};

use ndarray::{Array4, ArrayView4};

use crate::data::Dataset;
use crate::gan::{d_loss, d_loss_score_grads, g_loss, non_saturating_score_grads, sample_latent, LossValues};
use crate::nn::Module;
use crate::seed::{derive_seed, TAG_LATENT_D_STEP, TAG_LATENT_G_STEP};
use crate::tv::{batch_tv_subgradient, Reduction};
use crate::{Error, Result};

/// Consecutive non-finite iterations tolerated before training aborts.
pub const DIVERGENCE_PATIENCE: usize = 50;

impl Checkpoint {
    /// One discriminator update. Returns the discriminator loss (NaN when the
    /// scores were not finite, in which case no update is applied).
    pub fn discriminator_step(&mut self, real: ArrayView4<f32>) -> Result<f64> {
        let n = real.len_of(ndarray::Axis(0));
        let seed = derive_seed(self.config.seed, TAG_LATENT_D_STEP, self.iteration);
        let z = sample_latent::<f32>(n, self.config.latent_dim, seed)?;
        // Generator activations are not retained: the fake batch is detached.
        let (fake, _) = self.generator.forward_train(z.view())?;

        self.discriminator.zero_grad();
        let (real_scores, real_cache) = self.discriminator.forward_train(real)?;
        let (fake_scores, fake_cache) = self.discriminator.forward_train(fake.view())?;
        let (real_scores, fake_scores) = (real_scores.to_vec(), fake_scores.to_vec());
        if !all_finite(&real_scores) || !all_finite(&fake_scores) {
            return Ok(f64::NAN);
        }
        let loss = d_loss(&real_scores, &fake_scores)?;
        let (d_real, d_fake) = d_loss_score_grads(&real_scores, &fake_scores)?;
        self.discriminator.backward(&real_cache, &d_real, true);
        self.discriminator.backward(&fake_cache, &d_fake, true);
        self.disc_opt
            .update(self.discriminator.params_mut().into_iter().map(|(_, p)| p))?;
        Ok(loss)
    }

    /// One generator update on the TV-regularized non-saturating objective.
    /// Returns `(g_adv, g_tv, g_total)`.
    pub fn generator_step(&mut self, batch_size: usize) -> Result<(f64, f64, f64)> {
        let seed = derive_seed(self.config.seed, TAG_LATENT_G_STEP, self.iteration);
        let z = sample_latent::<f32>(batch_size, self.config.latent_dim, seed)?;
        self.generator.zero_grad();
        let (fake, gen_cache) = self.generator.forward_train(z.view())?;
        let (scores, disc_cache) = self.discriminator.forward_train(fake.view())?;
        let scores = scores.to_vec();
        if !all_finite(&scores) || fake.iter().any(|v| !v.is_finite()) {
            return Ok((f64::NAN, f64::NAN, f64::NAN));
        }
        let lambda = self.config.lambda_tv;
        let loss = g_loss(&scores, fake.view(), lambda)?;
        let d_scores = non_saturating_score_grads(&scores)?;
        let mut d_image: Array4<f32> = self.discriminator.backward(&disc_cache, &d_scores, false);
        if lambda > 0.0 {
            let tv_grad = batch_tv_subgradient(fake.view(), Reduction::Mean)?;
            d_image.scaled_add(lambda as f32, &tv_grad);
        }
        self.generator.backward(&gen_cache, d_image.view());
        self.gen_opt
            .update(self.generator.params_mut().into_iter().map(|(_, p)| p))?;
        Ok((loss.g_adv, loss.g_tv, loss.g_total))
    }

    /// A full iteration: discriminator step, then generator step.
    pub fn train_step(&mut self, real: ArrayView4<f32>) -> Result<LossValues> {
        let n = real.len_of(ndarray::Axis(0));
        let d = self.discriminator_step(real)?;
        let (g_adv, g_tv, g_total) = self.generator_step(n)?;
        self.iteration += 1;
        Ok(LossValues {
            d_loss: d,
            g_adv,
            g_tv,
            g_total,
        })
    }
}

fn all_finite(v: &[f32]) -> bool {
    v.iter().all(|s| s.is_finite())
}

fn check_dataset(state: &Checkpoint, dataset: &Dataset) -> Result<()> {
    if dataset.len() < state.config.batch_size {
        return Err(Error::Data(format!(
            "dataset has {} images, fewer than one batch of {}",
            dataset.len(),
            state.config.batch_size
        )));
    }
    if dataset.image_size() != state.config.image_size {
        return Err(Error::Dimension(format!(
            "dataset images are {}px, config expects {}px",
            dataset.image_size(),
            state.config.image_size
        )));
    }
    Ok(())
}

/// Trains `state` until it has completed `state.config.epochs` epochs.
/// `on_epoch` runs after every completed epoch with the state and the trace
/// of this call so far. Partial batches at the end of an epoch are dropped.
pub fn run_epochs<F>(state: &mut Checkpoint, dataset: &Dataset, mut on_epoch: F) -> Result<LossTrace>
where
    F: FnMut(&Checkpoint, &LossTrace) -> Result<()>,
{
    check_dataset(state, dataset)?;
    let batch = state.config.batch_size;
    let batches = dataset.len() / batch;
    let mut trace = LossTrace::new();
    let mut bad_streak = 0usize;
    while state.epoch < state.config.epochs {
        let order = dataset.epoch_order(state.epoch);
        let epoch_number = state.epoch + 1;
        for b in 0..batches {
            let real = dataset.gather(&order[b * batch..(b + 1) * batch]);
            let iteration = state.iteration;
            let losses = state.train_step(real.view())?;
            trace.push(TraceRecord {
                iteration,
                epoch: epoch_number,
                losses,
            })?;
            if losses.is_finite() {
                bad_streak = 0;
            } else {
                bad_streak += 1;
                if bad_streak >= DIVERGENCE_PATIENCE {
                    return Err(Error::Divergence {
                        iteration,
                        consecutive: bad_streak,
                        trace: Box::new(trace),
                    });
                }
            }
        }
        state.epoch += 1;
        log::info!(
            "epoch {}/{}: mean g_adv {:.4}",
            state.epoch,
            state.config.epochs,
            trace.mean_g_adv(epoch_number).unwrap_or(f64::NAN)
        );
        on_epoch(state, &trace)?;
    }
    Ok(trace)
}

/// Trains a fresh model for `config.epochs` epochs.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<(Checkpoint, LossTrace)> {
    let mut state = Checkpoint::new(config)?;
    let trace = run_epochs(&mut state, dataset, |_, _| Ok(()))?;
    Ok((state, trace))
}

/// Samples `count` images from a checkpoint's generator (evaluation mode).
pub fn sample(checkpoint: &Checkpoint, count: usize, seed: u64) -> Result<Array4<f32>> {
    checkpoint.sample(count, seed)
}
