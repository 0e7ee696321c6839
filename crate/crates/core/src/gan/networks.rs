//! DC-GAN style networks.
//!
//! Generator: a learned projection of the latent to a `4×4` feature map,
//! followed by kernel-4/stride-2 transposed convolutions that double the
//! resolution at each stage. Hidden stages use batch norm + ReLU; the output
//! stage uses tanh. At 64×64 with base width `b` the channel widths are
//! `8b → 4b → 2b → b → 1`; the 32×32 configuration drops the first of those.
//!
//! Discriminator: the mirror image, kernel-4/stride-2 convolutions with
//! leaky ReLU (slope 0.2), batch norm on all but the input stage, then a
//! fully connected layer and a sigmoid.

use ndarray::{Array1, Array2, Array4, ArrayD, ArrayView2, ArrayView4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    leaky_relu, leaky_relu_backward, relu, relu_backward, sigmoid, tanh, tanh_backward, BatchNorm2d,
    BatchNormCache, Conv2d, Conv2dCache, ConvGeometry, ConvTranspose2d, ConvTranspose2dCache, Linear,
    LinearCache, Module, Param,
};
use crate::seed::{derive_seed, TAG_DISCRIMINATOR_INIT, TAG_GENERATOR_INIT};
use crate::trainer::TrainConfig;
use crate::{Error, Result, Scalar};

pub const SUPPORTED_IMAGE_SIZES: [usize; 2] = [32, 64];

const INIT_STD: f64 = 0.02;
const LEAKY_SLOPE: f64 = 0.2;
const BASE_SPATIAL: usize = 4;

fn check_geometry(image_size: usize, base_width: usize) -> Result<usize> {
    if base_width == 0 {
        return Err(Error::Config("base_width must be >= 1".into()));
    }
    match image_size {
        64 => Ok(4),
        32 => Ok(3),
        other => Err(Error::Config(format!(
            "unsupported image_size {other} (supported: {SUPPORTED_IMAGE_SIZES:?})"
        ))),
    }
}

/// Channel widths of the generator feature maps, from the `4×4` projection down.
fn generator_widths(image_size: usize, base_width: usize) -> Result<Vec<usize>> {
    let stages = check_geometry(image_size, base_width)?;
    Ok((0..stages).rev().map(|i| base_width << i).collect())
}

/// Channel widths after each discriminator convolution.
fn discriminator_widths(image_size: usize, base_width: usize) -> Result<Vec<usize>> {
    let stages = check_geometry(image_size, base_width)?;
    Ok((0..stages).map(|i| base_width << i).collect())
}

fn bn_entries<'a, T>(prefix: &str, bn: &'a BatchNorm2d<T>, out: &mut Vec<(String, &'a Param<T>)>) {
    out.push((format!("{prefix}.gamma"), &bn.gamma));
    out.push((format!("{prefix}.beta"), &bn.beta));
}

fn bn_entries_mut<'a, T>(prefix: &str, bn: &'a mut BatchNorm2d<T>, out: &mut Vec<(String, &'a mut Param<T>)>) {
    out.push((format!("{prefix}.gamma"), &mut bn.gamma));
    out.push((format!("{prefix}.beta"), &mut bn.beta));
}

fn bn_buffers<'a, T>(prefix: &str, bn: &'a BatchNorm2d<T>, out: &mut Vec<(String, &'a ArrayD<T>)>) {
    out.push((format!("{prefix}.running_mean"), &bn.running_mean));
    out.push((format!("{prefix}.running_var"), &bn.running_var));
}

fn bn_buffers_mut<'a, T>(prefix: &str, bn: &'a mut BatchNorm2d<T>, out: &mut Vec<(String, &'a mut ArrayD<T>)>) {
    out.push((format!("{prefix}.running_mean"), &mut bn.running_mean));
    out.push((format!("{prefix}.running_var"), &mut bn.running_var));
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    latent_dim: usize,
    image_size: usize,
    base_width: usize,
    project: Linear<T>,
    project_bn: BatchNorm2d<T>,
    hidden: Vec<(ConvTranspose2d<T>, BatchNorm2d<T>)>,
    output: ConvTranspose2d<T>,
}

pub struct GeneratorCache<T> {
    project: LinearCache<T>,
    project_bn: BatchNormCache<T>,
    project_act: Array4<T>,
    hidden: Vec<(ConvTranspose2dCache<T>, BatchNormCache<T>, Array4<T>)>,
    output: ConvTranspose2dCache<T>,
    image: Array4<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn new(latent_dim: usize, image_size: usize, base_width: usize, seed: u64) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::Config("latent_dim must be >= 1".into()));
        }
        let widths = generator_widths(image_size, base_width)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c0 = widths[0];
        let project = Linear::new(latent_dim, c0 * BASE_SPATIAL * BASE_SPATIAL, false, INIT_STD, &mut rng);
        let project_bn = BatchNorm2d::new(c0, INIT_STD, &mut rng);
        let hidden = widths
            .windows(2)
            .map(|w| {
                let deconv = ConvTranspose2d::new(w[0], w[1], ConvGeometry::HALVING, INIT_STD, &mut rng);
                let bn = BatchNorm2d::new(w[1], INIT_STD, &mut rng);
                (deconv, bn)
            })
            .collect();
        let output = ConvTranspose2d::new(*widths.last().expect("non-empty"), 1, ConvGeometry::HALVING, INIT_STD, &mut rng);
        Ok(Self {
            latent_dim,
            image_size,
            base_width,
            project,
            project_bn,
            hidden,
            output,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn base_width(&self) -> usize {
        self.base_width
    }

    /// Number of learned upsampling stages, counting the latent projection.
    pub fn stage_count(&self) -> usize {
        2 + self.hidden.len()
    }

    fn check_latent(&self, z: &ArrayView2<T>) -> Result<()> {
        let (n, d) = z.dim();
        if n == 0 || d != self.latent_dim {
            return Err(Error::Dimension(format!(
                "expected latents of shape (n >= 1, {}), got ({n}, {d})",
                self.latent_dim
            )));
        }
        Ok(())
    }

    fn reshape_projection(&self, p: Array2<T>) -> Array4<T> {
        let n = p.nrows();
        let c0 = self.project_bn.channels();
        p.into_shape_with_order((n, c0, BASE_SPATIAL, BASE_SPATIAL))
            .expect("projection width")
    }

    /// Training-mode forward pass (batch statistics; running stats are updated).
    pub fn forward_train(&mut self, z: ArrayView2<T>) -> Result<(Array4<T>, GeneratorCache<T>)> {
        self.check_latent(&z)?;
        let (p, project) = self.project.forward(z);
        let p = self.reshape_projection(p);
        let (b, project_bn) = self.project_bn.forward_train(p.view());
        let project_act = relu(b.view());
        let mut hidden = Vec::with_capacity(self.hidden.len());
        let mut h = project_act.clone();
        for (deconv, bn) in &mut self.hidden {
            let (y, dc) = deconv.forward(h.view());
            let (y, bc) = bn.forward_train(y.view());
            h = relu(y.view());
            hidden.push((dc, bc, h.clone()));
        }
        let (y, output) = self.output.forward(h.view());
        let image = tanh(y.view());
        let cache = GeneratorCache {
            project,
            project_bn,
            project_act,
            hidden,
            output,
            image: image.clone(),
        };
        Ok((image, cache))
    }

    /// Evaluation-mode forward pass using the running normalization statistics.
    pub fn forward_eval(&self, z: ArrayView2<T>) -> Result<Array4<T>> {
        self.check_latent(&z)?;
        let (p, _) = self.project.forward(z);
        let p = self.reshape_projection(p);
        let mut h = relu(self.project_bn.forward_eval(p.view()).view());
        for (deconv, bn) in &self.hidden {
            let (y, _) = deconv.forward(h.view());
            h = relu(bn.forward_eval(y.view()).view());
        }
        let (y, _) = self.output.forward(h.view());
        Ok(tanh(y.view()))
    }

    /// Accumulates parameter gradients for `d_image = ∂L/∂output`.
    pub fn backward(&mut self, cache: &GeneratorCache<T>, d_image: ArrayView4<T>) {
        let d = tanh_backward(cache.image.view(), d_image);
        let mut d = self.output.backward(&cache.output, d.view(), true);
        for ((deconv, bn), (dc, bc, act)) in self.hidden.iter_mut().zip(&cache.hidden).rev() {
            let g = relu_backward(act.view(), d.view());
            let g = bn.backward(bc, g.view(), true);
            d = deconv.backward(dc, g.view(), true);
        }
        let g = relu_backward(cache.project_act.view(), d.view());
        let g = self.project_bn.backward(&cache.project_bn, g.view(), true);
        let n = g.len_of(ndarray::Axis(0));
        let g = g.into_shape_with_order((n, self.project.weight.value.shape()[0]))
            .expect("projection width");
        self.project.backward(&cache.project, g.view(), true);
    }
}

impl<T: Scalar> Module<T> for Generator<T> {
    fn params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = vec![("project.weight".to_string(), &self.project.weight)];
        bn_entries("project_bn", &self.project_bn, &mut out);
        for (i, (deconv, bn)) in self.hidden.iter().enumerate() {
            out.push((format!("up{i}.weight"), &deconv.weight));
            bn_entries(&format!("up{i}_bn"), bn, &mut out);
        }
        out.push(("out.weight".to_string(), &self.output.weight));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let mut out = vec![("project.weight".to_string(), &mut self.project.weight)];
        bn_entries_mut("project_bn", &mut self.project_bn, &mut out);
        for (i, (deconv, bn)) in self.hidden.iter_mut().enumerate() {
            out.push((format!("up{i}.weight"), &mut deconv.weight));
            bn_entries_mut(&format!("up{i}_bn"), bn, &mut out);
        }
        out.push(("out.weight".to_string(), &mut self.output.weight));
        out
    }

    fn buffers(&self) -> Vec<(String, &ArrayD<T>)> {
        let mut out = Vec::new();
        bn_buffers("project_bn", &self.project_bn, &mut out);
        for (i, (_, bn)) in self.hidden.iter().enumerate() {
            bn_buffers(&format!("up{i}_bn"), bn, &mut out);
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut ArrayD<T>)> {
        let mut out = Vec::new();
        bn_buffers_mut("project_bn", &mut self.project_bn, &mut out);
        for (i, (_, bn)) in self.hidden.iter_mut().enumerate() {
            bn_buffers_mut(&format!("up{i}_bn"), bn, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    image_size: usize,
    base_width: usize,
    input: Conv2d<T>,
    hidden: Vec<(Conv2d<T>, BatchNorm2d<T>)>,
    fc: Linear<T>,
}

pub struct DiscriminatorCache<T> {
    input: Conv2dCache<T>,
    input_act: Array4<T>,
    hidden: Vec<(Conv2dCache<T>, BatchNormCache<T>, Array4<T>)>,
    fc: LinearCache<T>,
    scores: Array1<T>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(image_size: usize, base_width: usize, seed: u64) -> Result<Self> {
        let widths = discriminator_widths(image_size, base_width)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = Conv2d::new(1, widths[0], ConvGeometry::HALVING, INIT_STD, &mut rng);
        let hidden = widths
            .windows(2)
            .map(|w| {
                let conv = Conv2d::new(w[0], w[1], ConvGeometry::HALVING, INIT_STD, &mut rng);
                let bn = BatchNorm2d::new(w[1], INIT_STD, &mut rng);
                (conv, bn)
            })
            .collect();
        let last = *widths.last().expect("non-empty");
        let fc = Linear::new(last * BASE_SPATIAL * BASE_SPATIAL, 1, true, INIT_STD, &mut rng);
        Ok(Self {
            image_size,
            base_width,
            input,
            hidden,
            fc,
        })
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn base_width(&self) -> usize {
        self.base_width
    }

    /// Number of convolutional stages (the fully connected head excluded).
    pub fn conv_stage_count(&self) -> usize {
        1 + self.hidden.len()
    }

    fn check_images(&self, x: &ArrayView4<T>) -> Result<()> {
        let (n, c, h, w) = x.dim();
        if n == 0 || c != 1 || h != self.image_size || w != self.image_size {
            return Err(Error::Dimension(format!(
                "expected images of shape (n >= 1, 1, {s}, {s}), got ({n}, {c}, {h}, {w})",
                s = self.image_size
            )));
        }
        Ok(())
    }

    fn flatten(h: Array4<T>) -> Array2<T> {
        let n = h.len_of(ndarray::Axis(0));
        let rest = h.len() / n;
        h.into_shape_with_order((n, rest)).expect("contiguous")
    }

    fn scores_from_logits(logits: &Array2<T>) -> Array1<T> {
        logits.column(0).mapv(sigmoid)
    }

    pub fn forward_train(&mut self, x: ArrayView4<T>) -> Result<(Array1<T>, DiscriminatorCache<T>)> {
        self.check_images(&x)?;
        let slope = T::from_f64_lossy(LEAKY_SLOPE);
        let (y, input) = self.input.forward(x);
        let input_act = leaky_relu(y.view(), slope);
        let mut h = input_act.clone();
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for (conv, bn) in &mut self.hidden {
            let (y, cc) = conv.forward(h.view());
            let (y, bc) = bn.forward_train(y.view());
            h = leaky_relu(y.view(), slope);
            hidden.push((cc, bc, h.clone()));
        }
        let (logits, fc) = self.fc.forward(Self::flatten(h).view());
        let scores = Self::scores_from_logits(&logits);
        Ok((
            scores.clone(),
            DiscriminatorCache {
                input,
                input_act,
                hidden,
                fc,
                scores,
            },
        ))
    }

    pub fn forward_eval(&self, x: ArrayView4<T>) -> Result<Array1<T>> {
        self.check_images(&x)?;
        let slope = T::from_f64_lossy(LEAKY_SLOPE);
        let (y, _) = self.input.forward(x);
        let mut h = leaky_relu(y.view(), slope);
        for (conv, bn) in &self.hidden {
            let (y, _) = conv.forward(h.view());
            h = leaky_relu(bn.forward_eval(y.view()).view(), slope);
        }
        let (logits, _) = self.fc.forward(Self::flatten(h).view());
        Ok(Self::scores_from_logits(&logits))
    }

    /// Backpropagates `∂L/∂score` to the input images. Parameter gradients
    /// are accumulated only when `param_grads` is set.
    pub fn backward(&mut self, cache: &DiscriminatorCache<T>, d_scores: &[f64], param_grads: bool) -> Array4<T> {
        assert_eq!(d_scores.len(), cache.scores.len(), "one gradient per score");
        let slope = T::from_f64_lossy(LEAKY_SLOPE);
        let d_logits = Array2::from_shape_fn((d_scores.len(), 1), |(i, _)| {
            let s = cache.scores[i].as_f64();
            T::from_f64_lossy(d_scores[i] * s * (1.0 - s))
        });
        let d = self.fc.backward(&cache.fc, d_logits.view(), param_grads);
        let last_shape = match cache.hidden.last() {
            Some((_, _, act)) => act.raw_dim(),
            None => cache.input_act.raw_dim(),
        };
        let mut d: Array4<T> = d
            .into_shape_with_order(last_shape)
            .expect("flattened feature map");
        for ((conv, bn), (cc, bc, act)) in self.hidden.iter_mut().zip(&cache.hidden).rev() {
            let g = leaky_relu_backward(act.view(), d.view(), slope);
            let g = bn.backward(bc, g.view(), param_grads);
            d = conv.backward(cc, g.view(), param_grads);
        }
        let g = leaky_relu_backward(cache.input_act.view(), d.view(), slope);
        self.input.backward(&cache.input, g.view(), param_grads)
    }
}

impl<T: Scalar> Module<T> for Discriminator<T> {
    fn params(&self) -> Vec<(String, &Param<T>)> {
        let mut out = vec![("in.weight".to_string(), &self.input.weight)];
        for (i, (conv, bn)) in self.hidden.iter().enumerate() {
            out.push((format!("down{i}.weight"), &conv.weight));
            bn_entries(&format!("down{i}_bn"), bn, &mut out);
        }
        out.push(("fc.weight".to_string(), &self.fc.weight));
        out.push(("fc.bias".to_string(), self.fc.bias.as_ref().expect("fc has bias")));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let mut out = vec![("in.weight".to_string(), &mut self.input.weight)];
        for (i, (conv, bn)) in self.hidden.iter_mut().enumerate() {
            out.push((format!("down{i}.weight"), &mut conv.weight));
            bn_entries_mut(&format!("down{i}_bn"), bn, &mut out);
        }
        out.push(("fc.weight".to_string(), &mut self.fc.weight));
        out.push(("fc.bias".to_string(), self.fc.bias.as_mut().expect("fc has bias")));
        out
    }

    fn buffers(&self) -> Vec<(String, &ArrayD<T>)> {
        let mut out = Vec::new();
        for (i, (_, bn)) in self.hidden.iter().enumerate() {
            bn_buffers(&format!("down{i}_bn"), bn, &mut out);
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<(String, &mut ArrayD<T>)> {
        let mut out = Vec::new();
        for (i, (_, bn)) in self.hidden.iter_mut().enumerate() {
            bn_buffers_mut(&format!("down{i}_bn"), bn, &mut out);
        }
        out
    }
}

pub fn build_generator(config: &TrainConfig) -> Result<Generator<f32>> {
    Generator::new(
        config.latent_dim,
        config.image_size,
        config.base_width,
        derive_seed(config.seed, TAG_GENERATOR_INIT, 0),
    )
}

pub fn build_discriminator(config: &TrainConfig) -> Result<Discriminator<f32>> {
    Discriminator::new(
        config.image_size,
        config.base_width,
        derive_seed(config.seed, TAG_DISCRIMINATOR_INIT, 0),
    )
}
