//! Total-variation regularized DC-GAN for line-textured (palmprint-like)
//! image synthesis, plus a self-contained Fréchet Inception Distance
//! evaluator.
//!
//! The crate is organized bottom-up:
//!
//! * [`tv`] - anisotropic total variation and its subgradient.
//! * [`nn`] - the handful of layers the two networks need, with explicit
//!   forward/backward passes and an Adam optimizer.
//! * [`gan`] - generator/discriminator builders, adversarial losses and the
//!   latent prior.
//! * [`trainer`] - alternating minimax training, loss traces and checkpoints.
//! * [`fid`] - embedders, Gaussian moment estimation and the Fréchet distance.
//! * [`data`] - directory ingestion, normalization and the synthetic
//!   palm-line generator.
//! * [`cli`] - the `tvgan` command-line surface.

pub mod cli;
pub mod data;
pub mod error;
pub mod fid;
pub mod gan;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod trainer;
pub mod tv;

pub use error::{Error, Result};
pub use scalar::Scalar;
