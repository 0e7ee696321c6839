use ndarray::{Array1, Array2, ArrayView2};

use crate::{Error, Result};

/// Eigenvalues (ascending) and matching unit eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Only the upper triangle is trusted; the input is symmetrized first.
pub fn symmetric_eigen(matrix: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let (n, m) = matrix.dim();
    if n != m {
        return Err(Error::Dimension(format!("eigendecomposition needs a square matrix, got {n}x{m}")));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut a = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (matrix[[i, j]] + matrix[[j, i]]));
    let mut v = Array2::<f64>::eye(n);
    let total: f64 = a.iter().map(|x| x * x).sum();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * a[[i, j]] * a[[i, j]])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[[p, p]], a[[q, q]]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                if t == 0.0 {
                    // The off-diagonal entry is negligible next to the diagonal gap.
                    a[[p, q]] = 0.0;
                    a[[q, p]] = 0.0;
                    continue;
                }
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[[k, p]] = new_kp;
                    a[[p, k]] = new_kp;
                    a[[k, q]] = new_kq;
                    a[[q, k]] = new_kq;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    Ok(SymmetricEigen { values, vectors })
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues
/// (roundoff) are clamped to zero.
pub fn sqrtm_psd(matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
    let eig = symmetric_eigen(matrix)?;
    Ok(reconstruct(&eig, |l| l.max(0.0).sqrt()))
}

/// `V f(Λ) Vᵀ`.
pub(crate) fn reconstruct(eig: &SymmetricEigen, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let scaled = &eig.vectors * &eig.values.mapv(f);
    scaled.dot(&eig.vectors.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Array2::from_shape_simple_fn((n, n), || rng.random_range(-1.0..1.0));
        &b + &b.t()
    }

    #[test]
    fn two_by_two_by_hand() {
        let e = symmetric_eigen(arr2(&[[2.0, 1.0], [1.0, 2.0]]).view()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_the_input() {
        for n in [1, 3, 8, 20] {
            let a = random_symmetric(n, n as u64);
            let e = symmetric_eigen(a.view()).unwrap();
            let back = reconstruct(&e, |l| l);
            let err = (&back - &a).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(err < 1e-12, "n={n} err={err}");
            let gram = e.vectors.t().dot(&e.vectors);
            let ortho = (&gram - &Array2::<f64>::eye(n)).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(ortho < 1e-12);
            assert!(e.values.windows(2).into_iter().all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn square_root_squares_back() {
        let b = random_symmetric(6, 42);
        let spd = b.dot(&b.t()) + Array2::<f64>::eye(6) * 0.1;
        let r = sqrtm_psd(spd.view()).unwrap();
        let err = (&r.dot(&r) - &spd).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(err < 1e-11);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(symmetric_eigen(Array2::<f64>::zeros((2, 3)).view()).is_err());
        assert!(symmetric_eigen(arr2(&[[f64::NAN]]).view()).is_err());
    }
}
