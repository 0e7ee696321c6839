use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis, Ix1, Ix2};
use rand::Rng;

use super::Param;
use crate::Scalar;

/// Fully connected layer `y = x Wᵀ + b`, weight layout `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
}

#[derive(Debug, Clone)]
pub struct LinearCache<T> {
    input: Array2<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, bias: bool, init_std: f64, rng: &mut R) -> Self {
        Self {
            weight: Param::gaussian(&[outputs, inputs], 0.0, init_std, rng),
            bias: bias.then(|| Param::new(ndarray::ArrayD::zeros(vec![outputs]))),
        }
    }

    fn weight_view(&self) -> ArrayView2<'_, T> {
        self.weight.value.view().into_dimensionality::<Ix2>().expect("rank 2")
    }

    pub fn forward(&self, x: ArrayView2<T>) -> (Array2<T>, LinearCache<T>) {
        let mut y = x.dot(&self.weight_view().t());
        if let Some(b) = &self.bias {
            let b = b.value.view().into_dimensionality::<Ix1>().expect("rank 1");
            y += &b;
        }
        (y, LinearCache { input: x.to_owned() })
    }

    pub fn backward(&mut self, cache: &LinearCache<T>, dy: ArrayView2<T>, param_grads: bool) -> Array2<T> {
        if param_grads {
            let mut gw = self
                .weight
                .grad
                .view_mut()
                .into_dimensionality::<Ix2>()
                .expect("rank 2");
            general_mat_mul(T::one(), &dy.t(), &cache.input, T::one(), &mut gw);
            if let Some(b) = &mut self.bias {
                let mut gb = b.grad.view_mut().into_dimensionality::<Ix1>().expect("rank 1");
                gb += &dy.sum_axis(Axis(0));
            }
        }
        dy.dot(&self.weight_view())
    }
}
