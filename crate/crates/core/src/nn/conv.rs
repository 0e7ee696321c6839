use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array4, ArrayView2, ArrayView4, Ix2};
use rand::Rng;

use super::Param;
use crate::Scalar;

/// Square kernel geometry shared by strided and fractionally-strided convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    /// Kernel 4, stride 2, padding 1: halves (or doubles, transposed) the spatial size.
    pub const HALVING: ConvGeometry = ConvGeometry {
        kernel: 4,
        stride: 2,
        padding: 1,
    };

    pub fn conv_output(&self, size: usize) -> usize {
        (size + 2 * self.padding - self.kernel) / self.stride + 1
    }

    pub fn transposed_output(&self, size: usize) -> usize {
        (size - 1) * self.stride + self.kernel - 2 * self.padding
    }
}

/// Unfolds an `(N, C, H, W)` batch into a `(C·k·k, N·Ho·Wo)` patch matrix.
pub fn im2col<T: Scalar>(x: ArrayView4<T>, g: ConvGeometry) -> Array2<T> {
    let (n, c, h, w) = x.dim();
    let (k, s, p) = (g.kernel, g.stride, g.padding);
    let (ho, wo) = (g.conv_output(h), g.conv_output(w));
    let per_image = ho * wo;
    let ncols = n * per_image;
    let mut cols = Array2::<T>::zeros((c * k * k, ncols));
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let out = cols.as_slice_mut().expect("fresh array");
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * ncols;
                for ni in 0..n {
                    let src = (ni * c + ci) * h * w;
                    let dst = row + ni * per_image;
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src_row = src + iy as usize * w;
                        let dst_row = dst + oy * wo;
                        for ox in 0..wo {
                            let ix = (ox * s + kj) as isize - p as isize;
                            if ix >= 0 && ix < w as isize {
                                out[dst_row + ox] = xs[src_row + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters (and sums) patch columns back into an
/// `(N, C, H, W)` batch.
pub fn col2im<T: Scalar>(
    cols: ArrayView2<T>,
    shape: (usize, usize, usize, usize),
    g: ConvGeometry,
) -> Array4<T> {
    let (n, c, h, w) = shape;
    let (k, s, p) = (g.kernel, g.stride, g.padding);
    let (ho, wo) = (g.conv_output(h), g.conv_output(w));
    let per_image = ho * wo;
    let ncols = n * per_image;
    assert_eq!(cols.dim(), (c * k * k, ncols), "patch matrix shape");
    let cols = cols.as_standard_layout();
    let cs = cols.as_slice().expect("standard layout");
    let mut x = Array4::<T>::zeros(shape);
    let xs = x.as_slice_mut().expect("fresh array");
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * ncols;
                for ni in 0..n {
                    let dst = (ni * c + ci) * h * w;
                    let src = row + ni * per_image;
                    for oy in 0..ho {
                        let iy = (oy * s + ki) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst_row = dst + iy as usize * w;
                        let src_row = src + oy * wo;
                        for ox in 0..wo {
                            let ix = (ox * s + kj) as isize - p as isize;
                            if ix >= 0 && ix < w as isize {
                                xs[dst_row + ix as usize] += cs[src_row + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `(N, C, H, W)` -> `(C, N·H·W)`.
fn channels_first<T: Scalar>(x: ArrayView4<T>) -> Array2<T> {
    let (n, c, h, w) = x.dim();
    x.permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((c, n * h * w))
        .expect("contiguous")
}

/// `(C, N·H·W)` -> `(N, C, H, W)`.
fn batch_first<T: Scalar>(x: Array2<T>, n: usize, h: usize, w: usize) -> Array4<T> {
    let c = x.nrows();
    x.into_shape_with_order((c, n, h, w))
        .expect("element count")
        .permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_owned()
}

fn weight_matrix<T: Scalar>(p: &ndarray::ArrayD<T>, rows: usize, cols: usize) -> ArrayView2<'_, T> {
    p.view()
        .into_shape_with_order((rows, cols))
        .expect("weight shape")
        .into_dimensionality::<Ix2>()
        .expect("rank 2")
}

/// Strided convolution without bias. Weight layout `(C_out, C_in, k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub geometry: ConvGeometry,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache<T> {
    cols: Array2<T>,
    input_shape: (usize, usize, usize, usize),
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, geometry: ConvGeometry, init_std: f64, rng: &mut R) -> Self {
        let k = geometry.kernel;
        Self {
            weight: Param::gaussian(&[out_channels, in_channels, k, k], 0.0, init_std, rng),
            in_channels,
            out_channels,
            geometry,
        }
    }

    fn fan_in(&self) -> usize {
        self.in_channels * self.geometry.kernel * self.geometry.kernel
    }

    pub fn forward(&self, x: ArrayView4<T>) -> (Array4<T>, Conv2dCache<T>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "conv input channels");
        let (ho, wo) = (self.geometry.conv_output(h), self.geometry.conv_output(w));
        let cols = im2col(x, self.geometry);
        let wmat = weight_matrix(&self.weight.value, self.out_channels, self.fan_in());
        let y = batch_first(wmat.dot(&cols), n, ho, wo);
        (
            y,
            Conv2dCache {
                cols,
                input_shape: (n, c, h, w),
            },
        )
    }

    pub fn backward(&mut self, cache: &Conv2dCache<T>, dy: ArrayView4<T>, param_grads: bool) -> Array4<T> {
        let dy2 = channels_first(dy);
        let (rows, cols) = (self.out_channels, self.fan_in());
        if param_grads {
            let mut gw = self
                .weight
                .grad
                .view_mut()
                .into_shape_with_order((rows, cols))
                .expect("weight shape")
                .into_dimensionality::<Ix2>()
                .expect("rank 2");
            general_mat_mul(T::one(), &dy2, &cache.cols.t(), T::one(), &mut gw);
        }
        let wmat = weight_matrix(&self.weight.value, rows, cols);
        let dcols = wmat.t().dot(&dy2);
        col2im(dcols.view(), cache.input_shape, self.geometry)
    }
}

/// Fractionally-strided (transposed) convolution without bias.
/// Weight layout `(C_in, C_out, k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub weight: Param<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub geometry: ConvGeometry,
}

#[derive(Debug, Clone)]
pub struct ConvTranspose2dCache<T> {
    input: Array2<T>,
    input_shape: (usize, usize, usize, usize),
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, geometry: ConvGeometry, init_std: f64, rng: &mut R) -> Self {
        let k = geometry.kernel;
        Self {
            weight: Param::gaussian(&[in_channels, out_channels, k, k], 0.0, init_std, rng),
            in_channels,
            out_channels,
            geometry,
        }
    }

    fn patch_len(&self) -> usize {
        self.out_channels * self.geometry.kernel * self.geometry.kernel
    }

    pub fn forward(&self, x: ArrayView4<T>) -> (Array4<T>, ConvTranspose2dCache<T>) {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "transposed conv input channels");
        let (ho, wo) = (
            self.geometry.transposed_output(h),
            self.geometry.transposed_output(w),
        );
        let input = channels_first(x);
        let wmat = weight_matrix(&self.weight.value, self.in_channels, self.patch_len());
        let cols = wmat.t().dot(&input);
        let y = col2im(cols.view(), (n, self.out_channels, ho, wo), self.geometry);
        (
            y,
            ConvTranspose2dCache {
                input,
                input_shape: (n, c, h, w),
            },
        )
    }

    pub fn backward(
        &mut self,
        cache: &ConvTranspose2dCache<T>,
        dy: ArrayView4<T>,
        param_grads: bool,
    ) -> Array4<T> {
        let (n, _, h, w) = cache.input_shape;
        let dcols = im2col(dy, self.geometry);
        let (rows, cols) = (self.in_channels, self.patch_len());
        if param_grads {
            let mut gw = self
                .weight
                .grad
                .view_mut()
                .into_shape_with_order((rows, cols))
                .expect("weight shape")
                .into_dimensionality::<Ix2>()
                .expect("rank 2");
            general_mat_mul(T::one(), &cache.input, &dcols.t(), T::one(), &mut gw);
        }
        let wmat = weight_matrix(&self.weight.value, rows, cols);
        batch_first(wmat.dot(&dcols), n, h, w)
    }
}
