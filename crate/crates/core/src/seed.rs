//! Seed derivation. Every random stream in the crate is keyed by
//! `(base seed, purpose tag, index)` so that any single draw can be
//! reproduced without replaying the draws before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_GENERATOR_INIT: u64 = 0x47_454e;
pub const TAG_DISCRIMINATOR_INIT: u64 = 0x44_4953;
pub const TAG_SHUFFLE: u64 = 0x53_4855;
pub const TAG_LATENT_D_STEP: u64 = 0x4c_4144;
pub const TAG_LATENT_G_STEP: u64 = 0x4c_4147;
pub const TAG_GRID_LATENT: u64 = 0x47_5249;
pub const TAG_EMBEDDER: u64 = 0x45_4d42;
pub const TAG_SYNTH_CLASS: u64 = 0x53_5943;
pub const TAG_SYNTH_IMAGE: u64 = 0x53_5949;
pub const TAG_EVAL_SAMPLES: u64 = 0x45_5653;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ tag) ^ index)
}

pub fn rng_for(base: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag, index))
}
