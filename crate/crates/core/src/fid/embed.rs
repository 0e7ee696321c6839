use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Array4, ArrayView4, Axis};

use crate::data::area_resize;
use crate::nn::{leaky_relu, Conv2d, ConvGeometry};
use crate::seed::{rng_for, TAG_EMBEDDER};
use crate::{Error, Result};

/// Images are embedded in chunks of this many to bound peak memory.
pub const EMBED_CHUNK: usize = 256;

/// Maps a `(N, 1, S, S)` image batch to an `N × dim` feature matrix.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_chunk(&self, images: ArrayView4<f64>) -> Result<Array2<f64>>;

    fn embed(&self, images: ArrayView4<f32>) -> Result<Array2<f64>> {
        let (n, c, h, w) = images.dim();
        if c != 1 || h != w || h == 0 {
            return Err(Error::Dimension(format!(
                "expected (N, 1, S, S) images, got ({n}, {c}, {h}, {w})"
            )));
        }
        let mut out = Array2::zeros((n, self.dim()));
        let mut start = 0;
        while start < n {
            let end = (start + EMBED_CHUNK).min(n);
            let chunk = images.slice(s![start..end, .., .., ..]).mapv(f64::from);
            out.slice_mut(s![start..end, ..]).assign(&self.embed_chunk(chunk.view())?);
            start = end;
        }
        Ok(out)
    }
}

/// Area-downsamples each image to an 8×8 grid and flattens it.
#[derive(Debug, Clone, Copy, Default)]
pub struct PoolEmbedder;

const POOL_SIDE: usize = 8;

impl Embedder for PoolEmbedder {
    fn name(&self) -> &str {
        "pool"
    }

    fn dim(&self) -> usize {
        POOL_SIDE * POOL_SIDE
    }

    fn embed_chunk(&self, images: ArrayView4<f64>) -> Result<Array2<f64>> {
        let n = images.len_of(Axis(0));
        let mut out = Array2::zeros((n, self.dim()));
        for (i, img) in images.outer_iter().enumerate() {
            let pooled = area_resize(img.index_axis(Axis(0), 0), POOL_SIDE);
            out.row_mut(i).assign(&pooled.into_shape_with_order(POOL_SIDE * POOL_SIDE).expect("contiguous"));
        }
        Ok(out)
    }
}

/// Fixed random convolutional features: three stride-2 convolutions with
/// leaky ReLU, then global average pooling.
#[derive(Debug, Clone)]
pub struct RandomConvEmbedder {
    layers: Vec<Conv2d<f64>>,
    seed: u64,
}

const RANDOM_CONV_WIDTHS: [usize; 4] = [1, 16, 32, 64];
const EMBED_SLOPE: f64 = 0.2;

impl RandomConvEmbedder {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng_for(seed, TAG_EMBEDDER, 0);
        let g = ConvGeometry::HALVING;
        let layers = RANDOM_CONV_WIDTHS
            .windows(2)
            .map(|w| {
                let fan_in = (w[0] * g.kernel * g.kernel) as f64;
                Conv2d::new(w[0], w[1], g, (2.0 / fan_in).sqrt(), &mut rng)
            })
            .collect();
        Self { layers, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Default for RandomConvEmbedder {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Embedder for RandomConvEmbedder {
    fn name(&self) -> &str {
        "random-conv"
    }

    fn dim(&self) -> usize {
        RANDOM_CONV_WIDTHS[RANDOM_CONV_WIDTHS.len() - 1]
    }

    fn embed_chunk(&self, images: ArrayView4<f64>) -> Result<Array2<f64>> {
        let side = images.len_of(Axis(2));
        if side < 8 {
            return Err(Error::Dimension(format!("random-conv embedder needs images of at least 8 px, got {side}")));
        }
        let mut x: Array4<f64> = images.to_owned();
        for layer in &self.layers {
            let (y, _) = layer.forward(x.view());
            x = leaky_relu(y.view(), EMBED_SLOPE);
        }
        let (n, c, h, w) = x.dim();
        let flat = x.into_shape_with_order((n, c, h * w)).expect("contiguous");
        Ok(flat.mean_axis(Axis(2)).expect("non-empty"))
    }
}

/// Selects an embedder by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbedderKind {
    #[default]
    RandomConv,
    Pool,
}

impl EmbedderKind {
    pub fn build(self, seed: u64) -> Box<dyn Embedder> {
        match self {
            EmbedderKind::RandomConv => Box::new(RandomConvEmbedder::new(seed)),
            EmbedderKind::Pool => Box::new(PoolEmbedder),
        }
    }
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedderKind::RandomConv => "random-conv",
            EmbedderKind::Pool => "pool",
        })
    }
}

impl FromStr for EmbedderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-conv" => Ok(EmbedderKind::RandomConv),
            "pool" => Ok(EmbedderKind::Pool),
            other => Err(Error::Config(format!("unknown embedder {other:?} (expected random-conv or pool)"))),
        }
    }
}
