//! Discriminator and generator objectives on probability scores.
//!
//! Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before taking logs.
//! All reductions are means over the batch, evaluated in `f64`.

use ndarray::ArrayView4;

use crate::tv::{batch_tv, Reduction};
use crate::{Error, Result, Scalar};

pub const SCORE_EPS: f64 = 1e-7;

/// Decomposed generator objective: `g_total = g_adv + lambda · g_tv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    pub g_adv: f64,
    pub g_tv: f64,
    pub lambda: f64,
    pub g_total: f64,
}

/// All loss components recorded for one training iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValues {
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_tv: f64,
    pub g_total: f64,
}

impl LossValues {
    pub fn new(d_loss: f64, g: GeneratorLoss) -> Self {
        Self {
            d_loss,
            g_adv: g.g_adv,
            g_tv: g.g_tv,
            g_total: g.g_total,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_loss.is_finite() && self.g_adv.is_finite() && self.g_tv.is_finite() && self.g_total.is_finite()
    }
}

fn checked_scores<T: Scalar>(scores: &[T], what: &str) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Dimension(format!("no {what} scores")));
    }
    scores
        .iter()
        .map(|&s| {
            let s = s.as_f64();
            if (0.0..=1.0).contains(&s) {
                Ok(s.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
            } else {
                Err(Error::Domain(format!("{what} score {s} outside [0, 1]")))
            }
        })
        .collect()
}

/// `-mean(log D(x)) - mean(log(1 - D(G(z))))`.
pub fn d_loss<T: Scalar>(real_scores: &[T], fake_scores: &[T]) -> Result<f64> {
    let real = checked_scores(real_scores, "real")?;
    let fake = checked_scores(fake_scores, "fake")?;
    let real_term = -real.iter().map(|s| s.ln()).sum::<f64>() / real.len() as f64;
    let fake_term = -fake.iter().map(|s| (1.0 - s).ln()).sum::<f64>() / fake.len() as f64;
    Ok(real_term + fake_term)
}

/// Derivatives of [`d_loss`] with respect to each (clamped) score.
pub fn d_loss_score_grads<T: Scalar>(real_scores: &[T], fake_scores: &[T]) -> Result<(Vec<f64>, Vec<f64>)> {
    let real = checked_scores(real_scores, "real")?;
    let fake = checked_scores(fake_scores, "fake")?;
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    Ok((
        real.iter().map(|s| -1.0 / (nr * s)).collect(),
        fake.iter().map(|s| 1.0 / (nf * (1.0 - s))).collect(),
    ))
}

/// The non-saturating generator loss `-mean(log D(G(z)))`.
pub fn non_saturating_loss<T: Scalar>(fake_scores: &[T]) -> Result<f64> {
    let fake = checked_scores(fake_scores, "fake")?;
    Ok(-fake.iter().map(|s| s.ln()).sum::<f64>() / fake.len() as f64)
}

/// `∂/∂score` of [`non_saturating_loss`]: `-1 / (n · score)`, never zero.
pub fn non_saturating_score_grads<T: Scalar>(fake_scores: &[T]) -> Result<Vec<f64>> {
    let fake = checked_scores(fake_scores, "fake")?;
    let n = fake.len() as f64;
    Ok(fake.iter().map(|s| -1.0 / (n * s)).collect())
}

/// TV-regularized generator objective on a generated batch.
pub fn g_loss<T: Scalar>(fake_scores: &[T], generated: ArrayView4<T>, lambda: f64) -> Result<GeneratorLoss> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda_tv must be finite and >= 0, got {lambda}")));
    }
    let g_adv = non_saturating_loss(fake_scores)?;
    let g_tv = batch_tv(generated, Reduction::Mean)?;
    Ok(GeneratorLoss {
        g_adv,
        g_tv,
        lambda,
        g_total: g_adv + lambda * g_tv,
    })
}
