use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::linalg::{reconstruct, symmetric_eigen};
use crate::{Error, Result};

pub const STATS_MAGIC: &[u8; 4] = b"TVFS";
pub const STATS_VERSION: u16 = 1;

/// Relative asymmetry tolerated before a covariance is rejected.
const SYMMETRY_TOL: f64 = 1e-9;
/// Most negative eigenvalue (relative to the largest) accepted as roundoff.
const PSD_TOL: f64 = 1e-8;

/// Mean and (symmetric, PSD) covariance of an embedded sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    sample_count: usize,
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_symmetric(cov: &Array2<f64>) -> Result<()> {
    let asym = (cov - &cov.t()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if asym > SYMMETRY_TOL * max_abs(cov).max(1.0) {
        return Err(Error::Domain(format!("covariance is not symmetric (max |C - Cᵀ| = {asym:e})")));
    }
    Ok(())
}

fn symmetrize(cov: &Array2<f64>) -> Array2<f64> {
    (cov + &cov.t()) * 0.5
}

impl GaussianStats {
    /// Validates shapes, symmetry and positive semidefiniteness, then stores
    /// the symmetrized covariance `(C + Cᵀ) / 2`.
    pub fn new(mean: Array1<f64>, covariance: Array2<f64>, sample_count: usize) -> Result<Self> {
        let d = mean.len();
        if covariance.dim() != (d, d) {
            return Err(Error::Dimension(format!(
                "mean has dimension {d} but covariance is {:?}",
                covariance.dim()
            )));
        }
        if sample_count == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("statistics contain non-finite values".into()));
        }
        check_symmetric(&covariance)?;
        let covariance = symmetrize(&covariance);
        let eig = symmetric_eigen(covariance.view())?;
        let largest = eig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if let Some(&lowest) = eig.values.first() {
            if lowest < -PSD_TOL * largest {
                return Err(Error::Domain(format!(
                    "covariance is not positive semidefinite (eigenvalue {lowest:e})"
                )));
            }
        }
        Ok(Self {
            mean,
            covariance,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// `"TVFS"`, u16 version, u32 d, u64 count, then mean and row-major
    /// covariance as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.dim();
        let mut buf = Vec::with_capacity(18 + 8 * (d + d * d));
        buf.extend_from_slice(STATS_MAGIC);
        buf.extend_from_slice(&STATS_VERSION.to_le_bytes());
        buf.extend_from_slice(&(d as u32).to_le_bytes());
        buf.extend_from_slice(&(self.sample_count as u64).to_le_bytes());
        for v in self.mean.iter().chain(self.covariance.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 18 || &bytes[..4] != STATS_MAGIC {
            return Err(Error::corrupt(origin, "not a TVFS statistics file"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != STATS_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: STATS_VERSION,
            });
        }
        let d = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let count = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes")) as usize;
        let expected = d
            .checked_mul(d)
            .and_then(|dd| dd.checked_add(d))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(18));
        if expected != Some(bytes.len()) {
            return Err(Error::corrupt(origin, "statistics payload has the wrong length"));
        }
        let values: Vec<f64> = bytes[18..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mean = Array1::from(values[..d].to_vec());
        let cov = Array2::from_shape_vec((d, d), values[d..].to_vec()).expect("length checked");
        Self::new(mean, cov, count)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, path)
    }
}

/// Column means and unbiased (divisor `n − 1`) covariance of a
/// `count × d` feature matrix.
pub fn gaussian_stats(features: ArrayView2<f64>) -> Result<GaussianStats> {
    let (n, d) = features.dim();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if d == 0 {
        return Err(Error::Dimension("features have zero columns".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("features contain non-finite values".into()));
    }
    let mean = features.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &features - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    Ok(GaussianStats {
        mean,
        covariance: symmetrize(&cov),
        sample_count: n,
    })
}

/// Fréchet distance between two Gaussians, clamped at zero.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "statistics dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    check_symmetric(&a.covariance)?;
    check_symmetric(&b.covariance)?;
    let mean_term: f64 = (&a.mean - &b.mean).mapv(|x| x * x).sum();
    let sqrt_a = reconstruct(&symmetric_eigen(a.covariance.view())?, |l| l.max(0.0).sqrt());
    let inner = sqrt_a.dot(&b.covariance).dot(&sqrt_a);
    let inner_eig = symmetric_eigen(symmetrize(&inner).view())?;
    let trace_sqrt: f64 = inner_eig.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    let distance = mean_term + a.covariance.diag().sum() + b.covariance.diag().sum() - 2.0 * trace_sqrt;
    Ok(distance.max(0.0))
}
