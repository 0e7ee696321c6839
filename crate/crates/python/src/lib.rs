//! Python bindings for the `tvgan` crate.
//!
//! Images cross the boundary as NumPy arrays: single images as `(H, W)` or
//! `(C, H, W)` float64, batches as `(N, 1, S, S)` float32 in `[-1, 1]`.

use std::path::PathBuf;

use ndarray::Array4;
use numpy::{IntoPyArray, PyArray1, PyArray2, PyArray4, PyArrayDyn, PyReadonlyArray2, PyReadonlyArray4, PyReadonlyArrayDyn};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tvgan::data::{self, Dataset, SynthClassParams};
use tvgan::fid::{self as fidmod, EmbedderKind};
use tvgan::tv::Reduction;

create_exception!(tvgan, TvganError, PyException);

fn err(e: tvgan::Error) -> PyErr {
    TvganError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(text: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e: T::Err| TvganError::new_err(e.to_string()))
}

/// Anisotropic total variation of a `(H, W)` or `(C, H, W)` image.
#[pyfunction]
fn tv_value(image: PyReadonlyArrayDyn<'_, f64>) -> PyResult<f64> {
    tvgan::tv::tv_value(image.as_array()).map_err(err)
}

/// Subgradient of [`tv_value`] with `sign(0) = 0`.
#[pyfunction]
fn tv_subgradient<'py>(py: Python<'py>, image: PyReadonlyArrayDyn<'py, f64>) -> PyResult<Bound<'py, PyArrayDyn<f64>>> {
    Ok(tvgan::tv::tv_subgradient(image.as_array()).map_err(err)?.into_pyarray(py))
}

#[pyfunction]
#[pyo3(signature = (batch, reduction = "mean"))]
fn batch_tv(batch: PyReadonlyArray4<'_, f64>, reduction: &str) -> PyResult<f64> {
    tvgan::tv::batch_tv(batch.as_array(), parse::<Reduction>(reduction)?).map_err(err)
}

#[pyfunction]
fn d_loss(real_scores: Vec<f64>, fake_scores: Vec<f64>) -> PyResult<f64> {
    tvgan::gan::d_loss(&real_scores, &fake_scores).map_err(err)
}

#[pyfunction]
fn non_saturating_loss(fake_scores: Vec<f64>) -> PyResult<f64> {
    tvgan::gan::non_saturating_loss(&fake_scores).map_err(err)
}

/// Returns a dict with `g_adv`, `g_tv`, `lambda` and `g_total`.
#[pyfunction]
fn g_loss<'py>(
    py: Python<'py>,
    fake_scores: Vec<f64>,
    generated: PyReadonlyArray4<'py, f64>,
    lam: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let l = tvgan::gan::g_loss(&fake_scores, generated.as_array(), lam).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("g_adv", l.g_adv)?;
    d.set_item("g_tv", l.g_tv)?;
    d.set_item("lambda", l.lambda)?;
    d.set_item("g_total", l.g_total)?;
    Ok(d)
}

#[pyfunction]
fn sample_latent(py: Python<'_>, count: usize, latent_dim: usize, seed: u64) -> PyResult<Bound<'_, PyArray2<f32>>> {
    Ok(tvgan::gan::sample_latent::<f32>(count, latent_dim, seed).map_err(err)?.into_pyarray(py))
}

#[pyfunction]
fn normalize(gray: f64) -> f64 {
    data::normalize(gray)
}

#[pyfunction]
fn denormalize(value: f64) -> f64 {
    data::denormalize(value)
}

/// Synthetic palm-line images `start .. start + count` of one class.
#[pyfunction]
#[pyo3(signature = (count, size = 64, class_seed = 0, start = 0))]
fn synth_palm_lines(py: Python<'_>, count: usize, size: usize, class_seed: u64, start: usize) -> PyResult<Bound<'_, PyArray4<f32>>> {
    let params = SynthClassParams::default().with_class_seed(class_seed);
    Ok(data::synth_palm_lines_range(start, count, size, &params).map_err(err)?.into_pyarray(py))
}

/// Mean and covariance of a Gaussian fitted to embedding vectors.
#[pyclass(module = "tvgan", frozen)]
struct GaussianStats(fidmod::GaussianStats);

#[pymethods]
impl GaussianStats {
    #[new]
    fn new(mean: Vec<f64>, covariance: PyReadonlyArray2<'_, f64>, sample_count: usize) -> PyResult<Self> {
        fidmod::GaussianStats::new(mean.into(), covariance.as_array().to_owned(), sample_count)
            .map(Self)
            .map_err(err)
    }

    /// Unbiased estimate from `(N, d)` features.
    #[staticmethod]
    fn from_features(features: PyReadonlyArray2<'_, f64>) -> PyResult<Self> {
        fidmod::gaussian_stats(features.as_array()).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        fidmod::GaussianStats::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn mean<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray1<f64>> {
        self.0.mean().clone().into_pyarray(py)
    }

    #[getter]
    fn covariance<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.0.covariance().clone().into_pyarray(py)
    }

    #[getter]
    fn sample_count(&self) -> usize {
        self.0.sample_count()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!("GaussianStats(dim={}, sample_count={})", self.0.dim(), self.0.sample_count())
    }
}

#[pyfunction]
fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> PyResult<f64> {
    fidmod::frechet_distance(&a.0, &b.0).map_err(err)
}

/// FID between two `(N, 1, S, S)` float32 batches.
#[pyfunction]
#[pyo3(signature = (real, generated, embedder = "random-conv", embedder_seed = 0))]
fn fid(real: PyReadonlyArray4<'_, f32>, generated: PyReadonlyArray4<'_, f32>, embedder: &str, embedder_seed: u64) -> PyResult<f64> {
    let embedder = parse::<EmbedderKind>(embedder)?.build(embedder_seed);
    fidmod::fid(real.as_array(), generated.as_array(), embedder.as_ref()).map_err(err)
}

/// Training hyperparameters. Keyword arguments override the defaults (or
/// the desk-scale preset with `desk=True`) using the config file keys.
#[pyclass(module = "tvgan", skip_from_py_object)]
#[derive(Clone)]
struct TrainConfig(tvgan::trainer::TrainConfig);

#[pymethods]
impl TrainConfig {
    #[new]
    #[pyo3(signature = (desk = false, **overrides))]
    fn new(desk: bool, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut config = if desk {
            tvgan::trainer::TrainConfig::desk_scale()
        } else {
            tvgan::trainer::TrainConfig::default()
        };
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let value = v.str()?.to_string();
                config.apply_override(&key, &value).map_err(err)?;
            }
        }
        config.validate().map_err(err)?;
        Ok(Self(config))
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        tvgan::trainer::TrainConfig::from_toml_str(text).map(Self).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml_string()
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let mut next = self.0.clone();
        next.apply_override(key, &value.str()?.to_string()).map_err(err)?;
        next.validate().map_err(err)?;
        self.0 = next;
        Ok(())
    }

    fn fingerprint(&self) -> String {
        self.0.fingerprint().iter().map(|b| format!("{b:02x}")).collect()
    }

    #[getter]
    fn epochs(&self) -> u64 {
        self.0.epochs
    }

    #[getter]
    fn batch_size(&self) -> usize {
        self.0.batch_size
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.0.learning_rate
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.0.latent_dim
    }

    #[getter]
    fn lambda_tv(&self) -> f64 {
        self.0.lambda_tv
    }

    #[getter]
    fn image_size(&self) -> usize {
        self.0.image_size
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(epochs={}, batch_size={}, image_size={}, lambda_tv={}, seed={})",
            self.0.epochs, self.0.batch_size, self.0.image_size, self.0.lambda_tv, self.0.seed
        )
    }
}

/// Generator and discriminator parameters, optimizer state and counters.
#[pyclass(module = "tvgan")]
struct Checkpoint(tvgan::trainer::Checkpoint);

#[pymethods]
impl Checkpoint {
    /// Untrained state for `config`.
    #[new]
    fn new(config: &TrainConfig) -> PyResult<Self> {
        tvgan::trainer::Checkpoint::new(&config.0).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        tvgan::trainer::Checkpoint::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    /// `(count, 1, S, S)` float32 samples in `[-1, 1]`, deterministic in `seed`.
    fn sample<'py>(&self, py: Python<'py>, count: usize, seed: u64) -> PyResult<Bound<'py, PyArray4<f32>>> {
        Ok(self.0.sample(count, seed).map_err(err)?.into_pyarray(py))
    }

    #[getter]
    fn epoch(&self) -> u64 {
        self.0.epoch
    }

    #[getter]
    fn iteration(&self) -> u64 {
        self.0.iteration
    }

    #[getter]
    fn config(&self) -> TrainConfig {
        TrainConfig(self.0.config.clone())
    }

    fn __repr__(&self) -> String {
        format!("Checkpoint(epoch={}, iteration={})", self.0.epoch, self.0.iteration)
    }
}

/// Trains from scratch. Without `images` the dataset comes from the config
/// (synthetic or `data_dir`). Returns the final checkpoint and the loss
/// trace as a list of dicts.
#[pyfunction]
#[pyo3(signature = (config, images = None))]
fn train<'py>(
    py: Python<'py>,
    config: &TrainConfig,
    images: Option<PyReadonlyArray4<'py, f32>>,
) -> PyResult<(Checkpoint, Vec<Bound<'py, PyDict>>)> {
    let spec = config.0.dataset_spec();
    let dataset = match images {
        Some(a) => {
            let owned: Array4<f32> = a.as_array().to_owned();
            Dataset::new(owned, spec.shuffle_seed).map_err(err)?
        }
        None => spec.load().map_err(err)?,
    };
    let (state, trace) = tvgan::trainer::train(&config.0, &dataset).map_err(err)?;
    let records = trace
        .records()
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("iter", r.iteration)?;
            d.set_item("epoch", r.epoch)?;
            d.set_item("d_loss", r.losses.d_loss)?;
            d.set_item("g_adv", r.losses.g_adv)?;
            d.set_item("g_tv", r.losses.g_tv)?;
            d.set_item("g_total", r.losses.g_total)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((Checkpoint(state), records))
}

#[pymodule]
#[pyo3(name = "tvgan")]
fn tvgan_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TvganError", m.py().get_type::<TvganError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<GaussianStats>()?;
    m.add_class::<TrainConfig>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(tv_value, m)?)?;
    m.add_function(wrap_pyfunction!(tv_subgradient, m)?)?;
    m.add_function(wrap_pyfunction!(batch_tv, m)?)?;
    m.add_function(wrap_pyfunction!(d_loss, m)?)?;
    m.add_function(wrap_pyfunction!(non_saturating_loss, m)?)?;
    m.add_function(wrap_pyfunction!(g_loss, m)?)?;
    m.add_function(wrap_pyfunction!(sample_latent, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(denormalize, m)?)?;
    m.add_function(wrap_pyfunction!(synth_palm_lines, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fid, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
