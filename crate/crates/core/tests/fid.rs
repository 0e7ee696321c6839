use nalgebra::DMatrix;
use ndarray::{arr1, arr2, Array1, Array2, Array4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvgan::data::{synth_palm_lines_range, SynthClassParams};
use tvgan::fid::{
    fid, frechet_distance, gaussian_stats, sqrtm_psd, symmetric_eigen, Embedder, GaussianStats, PoolEmbedder,
    RandomConvEmbedder,
};
use tvgan::Error;

fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let b = uniform(d, d, rng);
    b.dot(&b.t()) + Array2::<f64>::eye(d) * 0.05
}

fn stats(mean: Array1<f64>, cov: Array2<f64>) -> GaussianStats {
    GaussianStats::new(mean, cov, 100).unwrap()
}

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Fréchet distance through the eigenvalues of the non-symmetric product Σ_a Σ_b.
fn product_oracle(a: &GaussianStats, b: &GaussianStats) -> f64 {
    let product = to_na(a.covariance()) * to_na(b.covariance());
    let trace_sqrt: f64 = product.complex_eigenvalues().iter().map(|l| l.sqrt().re).sum();
    let mean: f64 = (a.mean() - b.mean()).mapv(|x| x * x).sum();
    mean + a.covariance().diag().sum() + b.covariance().diag().sum() - 2.0 * trace_sqrt
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let q = to_na(&uniform(d, d, rng)).qr().q();
    Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)])
}

#[test]
fn two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = uniform(500, 8, &mut rng) * 3.0 + 1.0;
    let s = gaussian_stats(x.view()).unwrap();
    let (n, d) = x.dim();
    for j in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += x[[i, j]];
        }
        mean /= n as f64;
        assert!((s.mean()[j] - mean).abs() < 1e-12);
    }
    for j in 0..d {
        for k in 0..d {
            let (mj, mk) = (s.mean()[j], s.mean()[k]);
            let mut c = 0.0;
            for i in 0..n {
                c += (x[[i, j]] - mj) * (x[[i, k]] - mk);
            }
            c /= (n - 1) as f64;
            assert!((s.covariance()[[j, k]] - c).abs() < 1e-12);
        }
    }
    assert_eq!(s.sample_count(), 500);
}

#[test]
fn hand_examples() {
    let s = gaussian_stats(arr2(&[[0.0, 0.0], [2.0, 2.0]]).view()).unwrap();
    assert_eq!(s.mean(), &arr1(&[1.0, 1.0]));
    assert_eq!(s.covariance(), &arr2(&[[2.0, 2.0], [2.0, 2.0]]));
    assert!(matches!(
        gaussian_stats(Array2::<f64>::zeros((1, 3)).view()),
        Err(Error::InsufficientSamples { .. })
    ));
}

#[test]
fn analytic_cases() {
    let eye = Array2::<f64>::eye(2);
    let a = stats(arr1(&[0.0, 0.0]), eye.clone());
    assert!(frechet_distance(&a, &a).unwrap().abs() <= 1e-10);
    let b = stats(arr1(&[1.0, 1.0]), eye);
    assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() <= 1e-10);
    let c = stats(arr1(&[0.0, 0.0]), arr2(&[[1.0, 0.0], [0.0, 4.0]]));
    let d = stats(arr1(&[0.0, 0.0]), arr2(&[[4.0, 0.0], [0.0, 1.0]]));
    assert!((frechet_distance(&c, &d).unwrap() - 2.0).abs() <= 1e-10);
}

#[test]
fn random_spd_pairs_match_the_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let d = 6;
        let a = stats(uniform(1, d, &mut rng).row(0).to_owned(), random_spd(d, &mut rng));
        let b = stats(uniform(1, d, &mut rng).row(0).to_owned(), random_spd(d, &mut rng));
        let (got, want) = (frechet_distance(&a, &b).unwrap(), product_oracle(&a, &b));
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1e-12), "{got} vs {want}");
    }
}

#[test]
fn mean_sensitivity_and_commuting_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cov = random_spd(5, &mut rng);
    let (m1, m2) = (uniform(1, 5, &mut rng).row(0).to_owned(), uniform(1, 5, &mut rng).row(0).to_owned());
    let dist = frechet_distance(&stats(m1.clone(), cov.clone()), &stats(m2.clone(), cov)).unwrap();
    let sq: f64 = (&m1 - &m2).mapv(|x| x * x).sum();
    assert!((dist - sq).abs() <= 1e-9 * sq.max(1.0));

    let q = random_orthogonal(4, &mut rng);
    let lam = [0.5, 1.0, 2.0, 9.0];
    let nu = [3.0, 0.25, 2.0, 1.0];
    let build = |v: &[f64]| q.dot(&Array2::from_diag(&arr1(v))).dot(&q.t());
    let zero = Array1::<f64>::zeros(4);
    let dist = frechet_distance(&stats(zero.clone(), build(&lam)), &stats(zero, build(&nu))).unwrap();
    let want: f64 = lam.iter().zip(&nu).map(|(l, n)| (l.sqrt() - n.sqrt()).powi(2)).sum();
    assert!((dist - want).abs() <= 1e-10);
}

#[test]
fn rigid_motion_invariance_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = 5;
    let xa = uniform(300, d, &mut rng);
    let xb = uniform(300, d, &mut rng) * 1.5 + 0.3;
    let q = random_orthogonal(d, &mut rng);
    let t = uniform(1, d, &mut rng).row(0).to_owned() * 4.0;
    let moved = |x: &Array2<f64>| x.dot(&q.t()) + &t;
    let base = frechet_distance(&gaussian_stats(xa.view()).unwrap(), &gaussian_stats(xb.view()).unwrap()).unwrap();
    let after = frechet_distance(
        &gaussian_stats(moved(&xa).view()).unwrap(),
        &gaussian_stats(moved(&xb).view()).unwrap(),
    )
    .unwrap();
    assert!((base - after).abs() <= 1e-8);
    let back = frechet_distance(&gaussian_stats(xb.view()).unwrap(), &gaussian_stats(xa.view()).unwrap()).unwrap();
    assert!((base - back).abs() <= 1e-10);
}

#[test]
fn singular_covariances_are_handled() {
    let a = stats(arr1(&[0.0, 0.0, 0.0]), Array2::zeros((3, 3)));
    let b = stats(arr1(&[0.0, 0.0, 0.0]), Array2::from_diag(&arr1(&[1.0, 0.0, 4.0])));
    assert!((frechet_distance(&a, &b).unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(frechet_distance(&b, &b).unwrap(), 0.0);
}

#[test]
fn sqrtm_and_eigen_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random_spd(7, &mut rng);
    let r = sqrtm_psd(a.view()).unwrap();
    assert!((r.dot(&r) - &a).iter().all(|v| v.abs() < 1e-10));
    let eig = symmetric_eigen(a.view()).unwrap();
    let oracle = to_na(&a).symmetric_eigenvalues();
    let mut want: Vec<f64> = oracle.iter().copied().collect();
    want.sort_by(f64::total_cmp);
    for (g, w) in eig.values.iter().zip(&want) {
        assert!((g - w).abs() < 1e-10 * w.abs().max(1.0));
    }
}

#[test]
fn fid_of_a_batch_with_itself_is_zero() {
    let images = synth_palm_lines_range(0, 80, 32, &SynthClassParams::default()).unwrap();
    for embedder in [&PoolEmbedder as &dyn Embedder, &RandomConvEmbedder::new(0)] {
        assert!(fid(images.view(), images.view(), embedder).unwrap().abs() <= 1e-8);
    }
}

#[test]
fn fid_is_symmetric_on_batches() {
    let a = synth_palm_lines_range(0, 100, 32, &SynthClassParams::default().with_class_seed(1)).unwrap();
    let b = synth_palm_lines_range(0, 100, 32, &SynthClassParams::default().with_class_seed(2)).unwrap();
    let e = RandomConvEmbedder::new(3);
    let (ab, ba) = (fid(a.view(), b.view(), &e).unwrap(), fid(b.view(), a.view(), &e).unwrap());
    assert!((ab - ba).abs() <= 1e-10, "{ab} vs {ba}");
}

#[test]
fn fid_needs_two_images_per_side() {
    let a = Array4::<f32>::zeros((1, 1, 32, 32));
    let b = Array4::<f32>::zeros((5, 1, 32, 32));
    assert!(matches!(fid(a.view(), b.view(), &PoolEmbedder), Err(Error::InsufficientSamples { .. })));
}

#[test]
fn stats_cache_round_trips_on_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let s = gaussian_stats(uniform(50, 6, &mut rng).view()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("real.tvfs");
    s.save(&path).unwrap();
    assert_eq!(GaussianStats::load(&path).unwrap(), s);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn distance_properties(seed in any::<u64>(), d in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = stats(uniform(1, d, &mut rng).row(0).to_owned(), random_spd(d, &mut rng));
        let b = stats(uniform(1, d, &mut rng).row(0).to_owned(), random_spd(d, &mut rng));
        let ab = frechet_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - frechet_distance(&b, &a).unwrap()).abs() <= 1e-10 * ab.max(1.0));
        prop_assert!(frechet_distance(&a, &a).unwrap() <= 1e-9);
        let want = product_oracle(&a, &b);
        prop_assert!((ab - want).abs() <= 1e-8 * want.abs().max(1e-12));
    }
}
