//! Minimal neural-network layers with hand-written backward passes.
//!
//! Every layer keeps its parameters as [`Param`]s (value plus accumulated
//! gradient). Forward passes in training mode return an explicit cache that
//! the matching backward pass consumes, so one layer can be run several times
//! per step (e.g. the discriminator on a real and then a fake batch).

mod activation;
mod adam;
mod conv;
mod linear;
mod norm;

pub use activation::{
    leaky_relu, leaky_relu_backward, relu, relu_backward, sigmoid, tanh, tanh_backward,
};
pub use adam::Adam;
pub use conv::{col2im, im2col, Conv2d, Conv2dCache, ConvGeometry, ConvTranspose2d, ConvTranspose2dCache};
pub use linear::{Linear, LinearCache};
pub use norm::{BatchNorm2d, BatchNormCache};

use ndarray::ArrayD;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::Scalar;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: ArrayD<T>,
    pub grad: ArrayD<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: ArrayD<T>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    /// Fills a tensor of `shape` with draws from N(mean, std²).
    pub fn gaussian<R: Rng>(shape: &[usize], mean: f64, std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(mean, std).expect("valid std");
        let value = ArrayD::from_shape_simple_fn(shape, || T::from_f64_lossy(dist.sample(rng)));
        Self::new(value)
    }
}

/// Named access to parameters and non-trainable buffers, in a stable order.
pub trait Module<T> {
    fn params(&self) -> Vec<(String, &Param<T>)>;

    fn params_mut(&mut self) -> Vec<(String, &mut Param<T>)>;

    fn buffers(&self) -> Vec<(String, &ArrayD<T>)>;

    fn buffers_mut(&mut self) -> Vec<(String, &mut ArrayD<T>)>;

    fn zero_grad(&mut self)
    where
        T: Scalar,
    {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|(_, p)| p.value.len()).sum()
    }
}
