use ndarray::{ArrayD, Zip};

use super::Param;
use crate::{Error, Result, Scalar};

/// Adam with bias correction. Moment buffers are aligned with the parameter
/// order of the module being optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first_moment: Vec<ArrayD<T>>,
    pub second_moment: Vec<ArrayD<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new<'a>(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        params: impl IntoIterator<Item = &'a Param<T>>,
    ) -> Self
    where
        T: 'a,
    {
        let (first_moment, second_moment) = params
            .into_iter()
            .map(|p| (ArrayD::zeros(p.value.raw_dim()), ArrayD::zeros(p.value.raw_dim())))
            .unzip();
        Self {
            learning_rate,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn update<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param<T>>) -> Result<()>
    where
        T: 'a,
    {
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let b1 = T::from_f64_lossy(self.beta1);
        let b2 = T::from_f64_lossy(self.beta2);
        let one = T::one();
        let step_size = T::from_f64_lossy(self.learning_rate / bias1);
        let inv_sqrt_bias2 = T::from_f64_lossy(1.0 / bias2.sqrt());
        let eps = T::from_f64_lossy(self.eps);

        let mut count = 0;
        for (i, p) in params.into_iter().enumerate() {
            let (m, v) = match (self.first_moment.get_mut(i), self.second_moment.get_mut(i)) {
                (Some(m), Some(v)) if m.shape() == p.value.shape() => (m, v),
                _ => {
                    return Err(Error::Dimension(format!(
                        "optimizer state does not match parameter {i}"
                    )))
                }
            };
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *w -= step_size * *m / (v.sqrt() * inv_sqrt_bias2 + eps);
                });
            count += 1;
        }
        if count != self.first_moment.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} tensors, update received {count}",
                self.first_moment.len()
            )));
        }
        Ok(())
    }
}
