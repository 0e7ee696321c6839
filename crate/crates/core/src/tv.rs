//! Anisotropic total variation.
//!
//! For an image `Y` the value is the sum of absolute first differences
//! between vertically and horizontally adjacent pixels, counting only pairs
//! that lie inside the image (no padding, no wraparound). Multi-channel
//! images sum the per-channel values. The subgradient differentiates every
//! absolute-difference term with `sign(0) = 0`.

use ndarray::{Array, ArrayView, ArrayView2, ArrayView4, ArrayViewMut2, Axis, Dimension, IxDyn};

use crate::{Error, Result, Scalar};

/// How per-image TV values are aggregated over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    Sum,
    #[default]
    Mean,
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            other => Err(Error::Config(format!(
                "unknown reduction `{other}` (expected `sum` or `mean`)"
            ))),
        }
    }
}

/// Splits a rank-2 `(H, W)` or rank-3 `(C, H, W)` view into its channel planes.
fn channel_planes<'a, T>(image: &'a ArrayView<'a, T, IxDyn>) -> Result<Vec<ArrayView2<'a, T>>> {
    let planes: Vec<ArrayView2<'a, T>> = match image.ndim() {
        2 => vec![image
            .view()
            .into_dimensionality()
            .expect("rank checked above")],
        3 => image
            .axis_iter(Axis(0))
            .map(|p| p.into_dimensionality().expect("rank checked above"))
            .collect(),
        n => {
            return Err(Error::Dimension(format!(
                "expected an (H, W) or (C, H, W) image, got rank {n}"
            )))
        }
    };
    if planes.is_empty() {
        return Err(Error::Dimension("image has zero channels".into()));
    }
    let (h, w) = planes[0].dim();
    if h == 0 || w == 0 {
        return Err(Error::Dimension(format!("empty image ({h}x{w})")));
    }
    Ok(planes)
}

fn plane_tv<T: Scalar>(plane: ArrayView2<T>) -> f64 {
    let (h, w) = plane.dim();
    let mut total = 0.0f64;
    for i in 0..h {
        for j in 0..w {
            let y = plane[[i, j]].as_f64();
            if i + 1 < h {
                total += (plane[[i + 1, j]].as_f64() - y).abs();
            }
            if j + 1 < w {
                total += (plane[[i, j + 1]].as_f64() - y).abs();
            }
        }
    }
    total
}

#[inline]
fn sign<T: Scalar>(d: T) -> T {
    if d > T::zero() {
        T::one()
    } else if d < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Accumulates `scale * ∂TV/∂y` for one plane into `out`.
fn plane_subgradient_into<T: Scalar>(plane: ArrayView2<T>, mut out: ArrayViewMut2<T>, scale: T) {
    let (h, w) = plane.dim();
    for i in 0..h {
        for j in 0..w {
            let y = plane[[i, j]];
            if i + 1 < h {
                let s = sign(plane[[i + 1, j]] - y) * scale;
                out[[i + 1, j]] += s;
                out[[i, j]] -= s;
            }
            if j + 1 < w {
                let s = sign(plane[[i, j + 1]] - y) * scale;
                out[[i, j + 1]] += s;
                out[[i, j]] -= s;
            }
        }
    }
}

/// Total variation of a single `(H, W)` or `(C, H, W)` image.
pub fn tv_value<T: Scalar, D: Dimension>(image: ArrayView<T, D>) -> Result<f64> {
    let image = image.into_dyn();
    let planes = channel_planes(&image)?;
    Ok(planes.into_iter().map(plane_tv).sum())
}

/// A subgradient of [`tv_value`], same shape as the input.
pub fn tv_subgradient<T: Scalar, D: Dimension>(image: ArrayView<T, D>) -> Result<Array<T, D>> {
    let dyn_view = image.into_dyn();
    let planes = channel_planes(&dyn_view)?;
    let mut out = Array::<T, IxDyn>::zeros(dyn_view.raw_dim());
    if out.ndim() == 2 {
        let out2 = out.view_mut().into_dimensionality().expect("rank 2");
        plane_subgradient_into(planes[0].view(), out2, T::one());
    } else {
        for (plane, out_plane) in planes.into_iter().zip(out.axis_iter_mut(Axis(0))) {
            let out2 = out_plane.into_dimensionality().expect("rank 2");
            plane_subgradient_into(plane, out2, T::one());
        }
    }
    Ok(out
        .into_dimensionality::<D>()
        .expect("dimensionality preserved"))
}

fn check_batch<T>(batch: &ArrayView4<T>) -> Result<()> {
    let (n, c, h, w) = batch.dim();
    if n == 0 {
        return Err(Error::Dimension("empty batch".into()));
    }
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Dimension(format!("empty images ({c}x{h}x{w})")));
    }
    Ok(())
}

/// Per-image TV of an `(N, C, H, W)` batch, aggregated by `reduction`.
pub fn batch_tv<T: Scalar>(batch: ArrayView4<T>, reduction: Reduction) -> Result<f64> {
    check_batch(&batch)?;
    let n = batch.len_of(Axis(0));
    let total: f64 = batch
        .axis_iter(Axis(0))
        .map(|img| {
            img.axis_iter(Axis(0))
                .map(plane_tv)
                .sum::<f64>()
        })
        .sum();
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean => total / n as f64,
    })
}

/// Subgradient of [`batch_tv`] with respect to every pixel of the batch.
pub fn batch_tv_subgradient<T: Scalar>(
    batch: ArrayView4<T>,
    reduction: Reduction,
) -> Result<ndarray::Array4<T>> {
    check_batch(&batch)?;
    let n = batch.len_of(Axis(0));
    let scale = match reduction {
        Reduction::Sum => T::one(),
        Reduction::Mean => T::one() / T::from_usize(n).expect("batch size fits"),
    };
    let mut out = ndarray::Array4::<T>::zeros(batch.raw_dim());
    for (img, mut out_img) in batch.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        for (plane, out_plane) in img.axis_iter(Axis(0)).zip(out_img.axis_iter_mut(Axis(0))) {
            plane_subgradient_into(plane, out_plane, scale);
        }
    }
    Ok(out)
}
