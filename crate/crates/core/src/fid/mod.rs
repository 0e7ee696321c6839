//! Fréchet Inception Distance, built from scratch.
//!
//! Images are mapped to feature vectors by a pluggable [`Embedder`], each
//! feature set is summarized by its mean and unbiased covariance, and the
//! two Gaussians are compared with
//!
//! ```text
//! ‖μ_r − μ_g‖² + Tr(Σ_r + Σ_g − 2 (Σ_r Σ_g)^{1/2})
//! ```
//!
//! where the trace of the matrix square root is evaluated through the
//! symmetric product `Σ_r^{1/2} Σ_g Σ_r^{1/2}`, which has the same
//! eigenvalues as `Σ_r Σ_g` but admits a stable symmetric eigensolver.

mod embed;
mod linalg;
mod stats;

pub use embed::{Embedder, EmbedderKind, PoolEmbedder, RandomConvEmbedder, EMBED_CHUNK};
pub use linalg::{sqrtm_psd, symmetric_eigen, SymmetricEigen};
pub use stats::{frechet_distance, gaussian_stats, GaussianStats, STATS_MAGIC, STATS_VERSION};

use ndarray::ArrayView4;

use crate::{Error, Result};

/// FID between two image batches under `embedder`.
pub fn fid(real: ArrayView4<f32>, generated: ArrayView4<f32>, embedder: &dyn Embedder) -> Result<f64> {
    for (what, batch) in [("real", &real), ("generated", &generated)] {
        let n = batch.len_of(ndarray::Axis(0));
        if n < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: n });
        }
        if n < embedder.dim() {
            log::warn!(
                "{what} batch has {n} images but the embedding has {} dimensions; its covariance is singular",
                embedder.dim()
            );
        }
    }
    let a = gaussian_stats(embedder.embed(real)?.view())?;
    let b = gaussian_stats(embedder.embed(generated)?.view())?;
    frechet_distance(&a, &b)
}
