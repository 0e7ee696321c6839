//! DC-GAN generator and discriminator plus the adversarial and
//! TV-regularized objectives.

mod latent;
mod loss;
mod networks;

pub use latent::sample_latent;
pub use loss::{
    d_loss, d_loss_score_grads, g_loss, non_saturating_loss, non_saturating_score_grads,
    GeneratorLoss, LossValues, SCORE_EPS,
};
pub use networks::{
    build_discriminator, build_generator, Discriminator, DiscriminatorCache, Generator,
    GeneratorCache, SUPPORTED_IMAGE_SIZES,
};
