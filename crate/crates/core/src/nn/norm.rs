use ndarray::{Array1, Array4, ArrayD, ArrayView4};

use super::Param;
use crate::Scalar;

/// Per-channel batch normalization over `(N, H, W)`.
///
/// Training mode normalizes with the biased batch variance and folds the
/// unbiased variance into the running estimate; evaluation mode uses the
/// running statistics only, so each sample is processed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: ArrayD<T>,
    pub running_var: ArrayD<T>,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    normalized: Array4<T>,
    inv_std: Array1<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new<R: rand::Rng>(channels: usize, gamma_std: f64, rng: &mut R) -> Self {
        Self {
            gamma: Param::gaussian(&[channels], 1.0, gamma_std, rng),
            beta: Param::new(ArrayD::zeros(vec![channels])),
            running_mean: ArrayD::zeros(vec![channels]),
            running_var: ArrayD::ones(vec![channels]),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn forward_train(&mut self, x: ArrayView4<T>) -> (Array4<T>, BatchNormCache<T>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels(), "batch norm channels");
        let plane = h * w;
        let count = n * plane;
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut normalized = Array4::<T>::zeros((n, c, h, w));
        let mut y = Array4::<T>::zeros((n, c, h, w));
        let mut inv_std = Array1::<T>::zeros(c);
        let momentum = T::from_f64_lossy(self.momentum);
        let eps = T::from_f64_lossy(self.eps);
        let inv_count = T::one() / T::from_usize(count).expect("count");
        {
            let ns = normalized.as_slice_mut().expect("fresh");
            let ys = y.as_slice_mut().expect("fresh");
            for ch in 0..c {
                let mut sum = T::zero();
                for b in 0..n {
                    let off = (b * c + ch) * plane;
                    sum += xs[off..off + plane].iter().copied().sum::<T>();
                }
                let mean = sum * inv_count;
                let mut sq = T::zero();
                for b in 0..n {
                    let off = (b * c + ch) * plane;
                    sq += xs[off..off + plane]
                        .iter()
                        .map(|&v| (v - mean) * (v - mean))
                        .sum::<T>();
                }
                let var = sq * inv_count;
                let istd = T::one() / (var + eps).sqrt();
                inv_std[ch] = istd;
                let (g, bt) = (self.gamma.value[ch], self.beta.value[ch]);
                for b in 0..n {
                    let off = (b * c + ch) * plane;
                    for i in off..off + plane {
                        let nv = (xs[i] - mean) * istd;
                        ns[i] = nv;
                        ys[i] = g * nv + bt;
                    }
                }
                let unbiased = if count > 1 {
                    sq / T::from_usize(count - 1).expect("count")
                } else {
                    var
                };
                self.running_mean[ch] = (T::one() - momentum) * self.running_mean[ch] + momentum * mean;
                self.running_var[ch] = (T::one() - momentum) * self.running_var[ch] + momentum * unbiased;
            }
        }
        (y, BatchNormCache { normalized, inv_std })
    }

    pub fn forward_eval(&self, x: ArrayView4<T>) -> Array4<T> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels(), "batch norm channels");
        let eps = T::from_f64_lossy(self.eps);
        let mut y = x.as_standard_layout().into_owned();
        let plane = h * w;
        let ys = y.as_slice_mut().expect("standard layout");
        for ch in 0..c {
            let istd = T::one() / (self.running_var[ch] + eps).sqrt();
            let scale = self.gamma.value[ch] * istd;
            let shift = self.beta.value[ch] - self.running_mean[ch] * scale;
            for b in 0..n {
                let off = (b * c + ch) * plane;
                for v in &mut ys[off..off + plane] {
                    *v = *v * scale + shift;
                }
            }
        }
        y
    }

    pub fn backward(&mut self, cache: &BatchNormCache<T>, dy: ArrayView4<T>, param_grads: bool) -> Array4<T> {
        let (n, c, h, w) = dy.dim();
        let plane = h * w;
        let count = T::from_usize(n * plane).expect("count");
        let dy = dy.as_standard_layout();
        let ds = dy.as_slice().expect("standard layout");
        let ns = cache.normalized.as_slice().expect("standard layout");
        let mut dx = Array4::<T>::zeros((n, c, h, w));
        let dxs = dx.as_slice_mut().expect("fresh");
        for ch in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_n = T::zero();
            for b in 0..n {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    sum_dy += ds[i];
                    sum_dy_n += ds[i] * ns[i];
                }
            }
            if param_grads {
                self.gamma.grad[ch] += sum_dy_n;
                self.beta.grad[ch] += sum_dy;
            }
            let g = self.gamma.value[ch];
            let k = g * cache.inv_std[ch] / count;
            for b in 0..n {
                let off = (b * c + ch) * plane;
                for i in off..off + plane {
                    dxs[i] = k * (count * ds[i] - sum_dy - ns[i] * sum_dy_n);
                }
            }
        }
        dx
    }
}
