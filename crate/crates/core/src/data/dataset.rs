use std::path::{Path, PathBuf};

use ndarray::{Array2, Array4, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::normalize::normalize;
use super::synth::{synth_range, SynthClassParams};
use crate::seed::{rng_for, TAG_SHUFFLE};
use crate::{Error, Result};

pub const IMAGE_EXTENSIONS: [&str; 2] = ["png", "bmp"];

/// Where training images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Directory(PathBuf),
    Synthetic { count: usize, params: SynthClassParams },
}

/// Fully describes how to materialize a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub image_size: usize,
    pub shuffle_seed: u64,
    /// Decoder threads for directory sources; 0 decodes on the caller's thread.
    pub workers: usize,
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match &self.source {
            DataSource::Directory(path) => load_directory(path, self),
            DataSource::Synthetic { count, params } => {
                let (images, _) = synth_range(0, *count, self.image_size, params)?;
                Dataset::new(images, self.shuffle_seed)
            }
        }
    }
}

/// An in-memory `(N, 1, S, S)` image set in `[-1, 1]` with a seeded epoch order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Array4<f32>,
    shuffle_seed: u64,
}

impl Dataset {
    pub fn new(images: Array4<f32>, shuffle_seed: u64) -> Result<Self> {
        let (n, c, h, w) = images.dim();
        if n == 0 {
            return Err(Error::Data("dataset is empty".into()));
        }
        if c != 1 || h != w {
            return Err(Error::Dimension(format!(
                "dataset images must be (1, S, S), got ({c}, {h}, {w})"
            )));
        }
        if let Some(v) = images.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(Self {
            images: images.as_standard_layout().into_owned(),
            shuffle_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image_size(&self) -> usize {
        self.images.shape()[2]
    }

    pub fn images(&self) -> &Array4<f32> {
        &self.images
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed
    }

    pub fn with_shuffle_seed(mut self, seed: u64) -> Self {
        self.shuffle_seed = seed;
        self
    }

    /// Permutation of `0..len` used for `epoch`; a pure function of `(shuffle_seed, epoch)`.
    pub fn epoch_order(&self, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng_for(self.shuffle_seed, TAG_SHUFFLE, epoch));
        order
    }

    pub fn gather(&self, indices: &[usize]) -> Array4<f32> {
        self.images.select(Axis(0), indices)
    }

    /// Hex SHA-256 of the image tensor (shape and little-endian pixels).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in self.images.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        for v in self.images.iter() {
            h.update(v.to_le_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Box-filter (area-averaging) resize of a gray image to `size × size`.
/// Each output pixel is the overlap-weighted mean of the source pixels it covers.
pub fn area_resize(src: ArrayView2<f64>, size: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    if h == size && w == size {
        return src.to_owned();
    }
    let rows = resize_weights(h, size);
    let cols = resize_weights(w, size);
    // Horizontal pass then vertical pass.
    let mut tmp = Array2::<f64>::zeros((h, size));
    for y in 0..h {
        for (ox, taps) in cols.iter().enumerate() {
            tmp[[y, ox]] = taps.iter().map(|&(x, wt)| src[[y, x]] * wt).sum();
        }
    }
    let mut out = Array2::<f64>::zeros((size, size));
    for (oy, taps) in rows.iter().enumerate() {
        for ox in 0..size {
            out[[oy, ox]] = taps.iter().map(|&(y, wt)| tmp[[y, ox]] * wt).sum();
        }
    }
    out
}

/// For every output cell, the source indices it overlaps and their weights.
fn resize_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Decodes one file to gray levels in `[0, 255]`. Color inputs are reduced
/// by averaging their RGB channels.
pub fn load_image_file(path: &Path) -> Result<Array2<f64>> {
    use image::ColorType;
    let img = image::ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = match img.color() {
        ColorType::L8 | ColorType::La8 => {
            let l = img.to_luma8();
            Array2::from_shape_fn((h, w), |(y, x)| l.get_pixel(x as u32, y as u32)[0] as f64)
        }
        ColorType::L16 | ColorType::La16 => {
            let l = img.to_luma16();
            Array2::from_shape_fn((h, w), |(y, x)| l.get_pixel(x as u32, y as u32)[0] as f64 / 257.0)
        }
        _ => {
            let rgb = img.to_rgb8();
            Array2::from_shape_fn((h, w), |(y, x)| {
                let p = rgb.get_pixel(x as u32, y as u32);
                (p[0] as f64 + p[1] as f64 + p[2] as f64) / 3.0
            })
        }
    };
    Ok(gray)
}

pub(crate) fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn decode_normalized(path: &Path, size: usize) -> Result<Array2<f32>> {
    let gray = load_image_file(path)?;
    Ok(area_resize(gray.view(), size).mapv(|g| normalize(g) as f32))
}

/// Loads every PNG/BMP in `dir` (sorted by file name), resized to
/// `spec.image_size` and normalized to `[-1, 1]`. Undecodable files are
/// skipped with a warning. With `spec.workers > 0` decoding is spread over
/// that many threads; the result does not depend on the worker count.
pub fn load_directory(dir: &Path, spec: &DatasetSpec) -> Result<Dataset> {
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!("no PNG/BMP images in {}", dir.display())));
    }
    let size = spec.image_size;
    let decoded: Vec<Option<Array2<f32>>> = if spec.workers == 0 {
        files.iter().map(|f| report(f, decode_normalized(f, size))).collect()
    } else {
        let workers = spec.workers.min(files.len());
        let mut slots: Vec<Option<Array2<f32>>> = vec![None; files.len()];
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|wid| {
                    let files = &files;
                    scope.spawn(move || {
                        (wid..files.len())
                            .step_by(workers)
                            .map(|i| (i, report(&files[i], decode_normalized(&files[i], size))))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, img) in h.join().expect("decoder thread panicked") {
                    slots[i] = img;
                }
            }
        });
        slots
    };
    let good: Vec<Array2<f32>> = decoded.into_iter().flatten().collect();
    if good.is_empty() {
        return Err(Error::Data(format!(
            "none of the {} image files in {} could be decoded",
            files.len(),
            dir.display()
        )));
    }
    let mut images = Array4::<f32>::zeros((good.len(), 1, size, size));
    for (i, g) in good.iter().enumerate() {
        images.slice_mut(ndarray::s![i, 0, .., ..]).assign(g);
    }
    Dataset::new(images, spec.shuffle_seed)
}

fn report(path: &Path, r: Result<Array2<f32>>) -> Option<Array2<f32>> {
    match r {
        Ok(img) => Some(img),
        Err(e) => {
            log::warn!("skipping {}: {e}", path.display());
            None
        }
    }
}
