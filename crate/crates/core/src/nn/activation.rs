use ndarray::{Array, ArrayView, Dimension, Zip};

use crate::Scalar;

pub fn relu<T: Scalar, D: Dimension>(x: ArrayView<T, D>) -> Array<T, D> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// Backward of [`relu`] given its output `y`.
pub fn relu_backward<T: Scalar, D: Dimension>(y: ArrayView<T, D>, dy: ArrayView<T, D>) -> Array<T, D> {
    Zip::from(&y)
        .and(&dy)
        .map_collect(|&y, &g| if y > T::zero() { g } else { T::zero() })
}

pub fn leaky_relu<T: Scalar, D: Dimension>(x: ArrayView<T, D>, slope: T) -> Array<T, D> {
    x.mapv(|v| if v > T::zero() { v } else { v * slope })
}

/// Backward of [`leaky_relu`] given its output `y` (sign is preserved for slope > 0).
pub fn leaky_relu_backward<T: Scalar, D: Dimension>(
    y: ArrayView<T, D>,
    dy: ArrayView<T, D>,
    slope: T,
) -> Array<T, D> {
    Zip::from(&y)
        .and(&dy)
        .map_collect(|&y, &g| if y > T::zero() { g } else { g * slope })
}

pub fn tanh<T: Scalar, D: Dimension>(x: ArrayView<T, D>) -> Array<T, D> {
    x.mapv(T::tanh)
}

/// Backward of [`tanh`] given its output `y`.
pub fn tanh_backward<T: Scalar, D: Dimension>(y: ArrayView<T, D>, dy: ArrayView<T, D>) -> Array<T, D> {
    Zip::from(&y)
        .and(&dy)
        .map_collect(|&y, &g| g * (T::one() - y * y))
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
