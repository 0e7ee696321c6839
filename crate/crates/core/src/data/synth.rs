//! Procedural stand-in for palmprint crops: a few smooth dark curves
//! ("principal lines") on a lighter textured background.
//!
//! A class is identified by its `class_seed`, which fixes a line template
//! (slopes, bends and background texture frequencies). Individual images
//! jitter the template, so different class seeds give visibly different
//! distributions while images within a class vary around a shared layout.
//!
//! Each line lives in its own horizontal band and never leaves it, which
//! keeps lines disjoint: the binarized line mask of an image has exactly
//! one 8-connected component per line.

use ndarray::{Array2, Array4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::normalize::normalize;
use crate::seed::{rng_for, TAG_SYNTH_CLASS, TAG_SYNTH_IMAGE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthClassParams {
    pub line_count_min: usize,
    pub line_count_max: usize,
    /// Stroke thickness in pixels at the generated resolution.
    pub thickness_min: f64,
    pub thickness_max: f64,
    /// Bend magnitude as a fraction of the available band half-height, in `[0, 1]`.
    pub curvature_min: f64,
    pub curvature_max: f64,
    /// Peak deviation of the background texture, in gray levels.
    pub background_amplitude: f64,
    pub foreground_level: f64,
    pub background_level: f64,
    pub class_seed: u64,
}

impl Default for SynthClassParams {
    fn default() -> Self {
        Self {
            line_count_min: 3,
            line_count_max: 3,
            thickness_min: 1.0,
            thickness_max: 2.0,
            curvature_min: 0.2,
            curvature_max: 0.8,
            background_amplitude: 20.0,
            foreground_level: 60.0,
            background_level: 190.0,
            class_seed: 0,
        }
    }
}

const WAVES: usize = 3;
const MAX_SLOPE: f64 = 0.8;

impl SynthClassParams {
    pub fn with_class_seed(mut self, class_seed: u64) -> Self {
        self.class_seed = class_seed;
        self
    }

    pub fn with_line_count(mut self, lines: usize) -> Self {
        self.line_count_min = lines;
        self.line_count_max = lines;
        self
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.line_count_min > self.line_count_max {
            return bad(format!(
                "empty line_count range {}..={}",
                self.line_count_min, self.line_count_max
            ));
        }
        if !(self.thickness_min > 0.0) || self.thickness_min > self.thickness_max {
            return bad(format!(
                "thickness range must be positive and non-empty, got {}..={}",
                self.thickness_min, self.thickness_max
            ));
        }
        if !(0.0..=1.0).contains(&self.curvature_min)
            || !(0.0..=1.0).contains(&self.curvature_max)
            || self.curvature_min > self.curvature_max
        {
            return bad(format!(
                "curvature range must be a non-empty sub-range of [0, 1], got {}..={}",
                self.curvature_min, self.curvature_max
            ));
        }
        if !(self.background_amplitude >= 0.0) {
            return bad("background_amplitude must be >= 0".into());
        }
        for (name, level) in [
            ("foreground_level", self.foreground_level),
            ("background_level", self.background_level),
        ] {
            if !(0.0..=255.0).contains(&level) {
                return bad(format!("{name} must lie in [0, 255], got {level}"));
            }
        }
        if self.line_count_max > 0 {
            let band = size as f64 / self.line_count_max as f64;
            if band < self.thickness_max + 4.0 {
                return bad(format!(
                    "{} lines of thickness {} do not fit in a {size}px image",
                    self.line_count_max, self.thickness_max
                ));
            }
        }
        Ok(())
    }
}

struct LineTemplate {
    slope: f64,
    bend: f64,
}

struct ClassTemplate {
    lines: Vec<LineTemplate>,
    waves: [(f64, f64); WAVES],
}

impl ClassTemplate {
    fn new(params: &SynthClassParams) -> Self {
        let mut rng = rng_for(params.class_seed, TAG_SYNTH_CLASS, 0);
        let lines = (0..params.line_count_max)
            .map(|_| {
                let slope = rng.random_range(-MAX_SLOPE..=MAX_SLOPE);
                let magnitude = rng.random_range(params.curvature_min..=params.curvature_max);
                let bend = if rng.random_bool(0.5) { magnitude } else { -magnitude };
                LineTemplate { slope, bend }
            })
            .collect();
        let waves = std::array::from_fn(|_| (rng.random_range(0.5..3.0), rng.random_range(-3.0..3.0)));
        Self { lines, waves }
    }
}

/// Pixels covered by one stroke: every pixel within `radius` of a curve
/// sample plus the pixel nearest to it.
fn stamp(mask: &mut Array2<bool>, x: f64, y: f64, radius: f64) {
    let (h, w) = mask.dim();
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    if cy >= 0 && cx >= 0 && (cy as usize) < h && (cx as usize) < w {
        mask[[cy as usize, cx as usize]] = true;
    }
    let reach = radius.ceil() as isize;
    for py in cy - reach..=cy + reach {
        for px in cx - reach..=cx + reach {
            if py < 0 || px < 0 || py as usize >= h || px as usize >= w {
                continue;
            }
            let (dx, dy) = (px as f64 - x, py as f64 - y);
            if dx * dx + dy * dy <= radius * radius {
                mask[[py as usize, px as usize]] = true;
            }
        }
    }
}

fn render(params: &SynthClassParams, template: &ClassTemplate, size: usize, index: u64) -> (Array2<f64>, Array2<bool>) {
    let mut rng = rng_for(params.class_seed, TAG_SYNTH_IMAGE, index);
    let s = size as f64;
    let lines = rng.random_range(params.line_count_min..=params.line_count_max);
    let mut mask = Array2::from_elem((size, size), false);

    if lines > 0 {
        let band = s / lines as f64;
        for (k, line) in template.lines.iter().take(lines).enumerate() {
            let thickness = rng.random_range(params.thickness_min..=params.thickness_max);
            let radius = (thickness / 2.0).max(0.5);
            let room = (band / 2.0 - radius - 1.0).max(0.0);
            let center = (k as f64 + 0.5) * band - 0.5 + 0.2 * room * rng.random_range(-1.0..=1.0);
            let reach = 0.8 * room;
            let slope = (line.slope + rng.random_range(-0.15..=0.15)).clamp(-MAX_SLOPE, MAX_SLOPE);
            let bend = line.bend.signum()
                * (line.bend.abs() + rng.random_range(-0.1..=0.1)).clamp(params.curvature_min, params.curvature_max);
            let x0 = rng.random_range(0.0..=0.15) * (s - 1.0);
            let x1 = rng.random_range(0.85..=1.0) * (s - 1.0);
            let steps = 8 * size;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let u = 2.0 * t - 1.0;
                let shape = (slope * u + bend * (1.0 - u * u) - bend / 2.0).clamp(-1.0, 1.0);
                stamp(&mut mask, x0 + t * (x1 - x0), center + reach * shape, radius);
            }
        }
    }

    let phases: [f64; WAVES] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
    let amp = params.background_amplitude;
    let gray = Array2::from_shape_fn((size, size), |(y, x)| {
        let noise: f64 = rng.random_range(-1.0..=1.0);
        if mask[[y, x]] {
            params.foreground_level + 0.4 * amp * noise
        } else {
            let texture = template
                .waves
                .iter()
                .zip(phases)
                .map(|(&(fx, fy), phase)| {
                    (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) / s + phase).sin()
                })
                .sum::<f64>()
                / WAVES as f64;
            params.background_level + amp * (0.6 * texture + 0.4 * noise)
        }
        .clamp(0.0, 255.0)
    });
    (gray, mask)
}

/// Generates `count` normalized images of shape `(1, size, size)` together
/// with their binary line masks. Image `i` depends only on `(params, size, i)`.
pub fn synth_palm_lines_with_masks(
    count: usize,
    size: usize,
    params: &SynthClassParams,
) -> Result<(Array4<f32>, Vec<Array2<bool>>)> {
    synth_range(0, count, size, params)
}

/// Images `start..start + count` of the class (disjoint index ranges give
/// disjoint samples).
pub(crate) fn synth_range(
    start: usize,
    count: usize,
    size: usize,
    params: &SynthClassParams,
) -> Result<(Array4<f32>, Vec<Array2<bool>>)> {
    if count == 0 {
        return Err(Error::Config("synthetic image count must be >= 1".into()));
    }
    if !crate::gan::SUPPORTED_IMAGE_SIZES.contains(&size) {
        return Err(Error::Config(format!("unsupported synthetic image size {size}")));
    }
    params.validate(size)?;
    let template = ClassTemplate::new(params);
    let mut images = Array4::<f32>::zeros((count, 1, size, size));
    let mut masks = Vec::with_capacity(count);
    for i in 0..count {
        let (gray, mask) = render(params, &template, size, (start + i) as u64);
        images
            .slice_mut(ndarray::s![i, 0, .., ..])
            .assign(&gray.mapv(|g| normalize(g) as f32));
        masks.push(mask);
    }
    Ok((images, masks))
}

pub fn synth_palm_lines(count: usize, size: usize, params: &SynthClassParams) -> Result<Array4<f32>> {
    Ok(synth_palm_lines_with_masks(count, size, params)?.0)
}

/// Images `start..start + count` of the class; disjoint ranges never share an image.
pub fn synth_palm_lines_range(start: usize, count: usize, size: usize, params: &SynthClassParams) -> Result<Array4<f32>> {
    Ok(synth_range(start, count, size, params)?.0)
}
