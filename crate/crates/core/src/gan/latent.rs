use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// `count × latent_dim` i.i.d. standard-normal latents, deterministic in `seed`.
pub fn sample_latent<T>(count: usize, latent_dim: usize, seed: u64) -> Result<Array2<T>>
where
    StandardNormal: Distribution<T>,
{
    if count == 0 || latent_dim == 0 {
        return Err(Error::Config(format!(
            "latent batch needs count >= 1 and latent_dim >= 1 (got {count} x {latent_dim})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Array2::from_shape_simple_fn((count, latent_dim), || {
        StandardNormal.sample(&mut rng)
    }))
}
