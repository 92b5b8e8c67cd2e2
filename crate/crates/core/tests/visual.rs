mod support;

use image::{Rgb, RgbImage};
use lipleak::model::MOUTH_68;
use lipleak::visual::identity::csim_against;
use lipleak::visual::{
    csim, fit_gaussian, frechet_distance, lmd, psnr, ssim, GaussianFit, LmdOptions, QualityError, SsimParams, PSNR_CAP_DB,
};
use lipleak::{LandmarkTrack, SsimParams64, TrackKind};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use support::*;

fn params() -> SsimParams64 {
    SsimParams::default()
}

#[test]
fn ssim_matches_direct_formula_on_fixed_patterns() {
    for i in 0..4 {
        for j in 0..4 {
            let (a, b) = (pattern(i), pattern(j));
            let got = ssim(&a, &b, &params()).unwrap();
            let want = ssim_oracle(&a, &b);
            assert!((got - want).abs() < 1e-6, "patterns {i},{j}: {got} vs {want}");
        }
    }
}

#[test]
fn ssim_identity_cases_are_exact() {
    for i in 0..4 {
        assert_eq!(ssim(&pattern(i), &pattern(i), &params()).unwrap(), 1.0);
    }
    let flat = RgbImage::from_pixel(16, 16, Rgb([100, 100, 100]));
    assert_eq!(ssim(&flat, &flat, &params()).unwrap(), 1.0);
    let tiny = RgbImage::new(8, 8);
    assert!(matches!(ssim(&tiny, &tiny, &params()), Err(QualityError::TooSmall { .. })));
}

#[test]
fn psnr_analytic_cases() {
    let black = RgbImage::new(16, 16);
    let white = RgbImage::from_pixel(16, 16, Rgb([255; 3]));
    assert_eq!(psnr::<f64>(&black, &white).unwrap(), 0.0);
    assert_eq!(psnr::<f64>(&white, &white).unwrap(), PSNR_CAP_DB);
    // three channel values off by 51 out of 120: mse = 255² / 1000
    let a = RgbImage::new(8, 5);
    let mut c = a.clone();
    for x in 0..3 {
        c.put_pixel(x, 0, Rgb([51, 0, 0]));
    }
    assert_eq!(psnr::<f64>(&a, &c).unwrap(), 30.0);
}

#[test]
fn fit_two_points_and_identical_rows() {
    let t = track64(TrackKind::Distribution, &[vec![0.0, 0.0], vec![2.0, 0.0]]);
    let g = fit_gaussian(&t).unwrap();
    assert_eq!(g.mean, vec![1.0, 0.0]);
    assert_eq!(g.cov, vec![2.0, 0.0, 0.0, 0.0]);
    let same = track64(TrackKind::Distribution, &vec![vec![3.0, -1.0]; 5]);
    assert!(fit_gaussian(&same).unwrap().cov.iter().all(|&c| c == 0.0));
}

#[test]
fn fit_recovers_diagonal_gaussian() {
    let mut r = rng(99);
    let (mu, sd) = ([1.0, -2.0, 0.5], [1.0, 3.0, 0.25]);
    let n = 1000;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..3)
                .map(|k| {
                    let (u1, u2): (f64, f64) = (r.random_range(f64::EPSILON..1.0), r.random());
                    mu[k] + sd[k] * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                })
                .collect()
        })
        .collect();
    let g = fit_gaussian(&track64(TrackKind::Distribution, &rows)).unwrap();
    for k in 0..3 {
        let var = sd[k] * sd[k];
        assert!((g.mean[k] - mu[k]).abs() < 5.0 * sd[k] / (n as f64).sqrt());
        assert!((g.cov[k * 3 + k] - var).abs() < 5.0 * var * (2.0 / (n as f64 - 1.0)).sqrt());
        for j in 0..3 {
            if j != k {
                assert!(g.cov[k * 3 + j].abs() < 5.0 * sd[k] * sd[j] / (n as f64).sqrt());
            }
        }
    }
}

fn gauss(mean: Vec<f64>, cov: Vec<f64>) -> GaussianFit<f64> {
    GaussianFit::new(mean, cov).unwrap()
}

/// `‖μ1−μ2‖² + Tr Σ1 + Tr Σ2 − 2 Σ √λ(Σ1 Σ2)` using the eigenvalues of the
/// non-symmetric product directly.
fn frechet_oracle(m1: &[f64], c1: &[f64], m2: &[f64], c2: &[f64]) -> f64 {
    let d = m1.len();
    let (a, b) = (from_row_major(d, c1), from_row_major(d, c2));
    let prod: DMatrix<f64> = &a * &b;
    let cross: f64 = prod.complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum();
    let mean: f64 = m1.iter().zip(m2).map(|(x, y)| (x - y).powi(2)).sum();
    mean + a.trace() + b.trace() - 2.0 * cross
}

#[test]
fn frechet_closed_forms() {
    let one = |m: f64, v: f64| gauss(vec![m], vec![v]);
    assert!((frechet_distance(&one(0.0, 1.0), &one(1.0, 1.0)).unwrap().distance - 1.0).abs() < 1e-9);
    assert!((frechet_distance(&one(0.0, 4.0), &one(0.0, 1.0)).unwrap().distance - 1.0).abs() < 1e-9);
    let g = gauss(vec![1.0, 2.0], vec![2.0, 0.5, 0.5, 1.0]);
    assert_eq!(frechet_distance(&g, &g).unwrap().distance, 0.0);
}

#[test]
fn frechet_rotation_invariance_and_oracle_8d() {
    let mut r = rng(123);
    let d = 8;
    for _ in 0..100 {
        let (m1, m2) = (random_rows(&mut r, 1, d).remove(0), random_rows(&mut r, 1, d).remove(0));
        let (c1, c2) = (random_spd(&mut r, d), random_spd(&mut r, d));
        let base = frechet_distance(&gauss(m1.clone(), c1.clone()), &gauss(m2.clone(), c2.clone())).unwrap().distance;
        let oracle = frechet_oracle(&m1, &c1, &m2, &c2);
        assert!((base - oracle).abs() < 1e-6 * base.max(1.0), "{base} vs {oracle}");
        let q = random_rotation(&mut r, d);
        let rot = |m: &[f64], c: &[f64]| {
            let mv = &q * nalgebra::DVector::from_column_slice(m);
            let cm = &q * from_row_major(d, c) * q.transpose();
            let cm = (&cm + cm.transpose()) * 0.5;
            gauss(mv.iter().copied().collect(), row_major(&cm))
        };
        let rotated = frechet_distance(&rot(&m1, &c1), &rot(&m2, &c2)).unwrap().distance;
        assert!((base - rotated).abs() < 1e-6 * base.max(1.0), "{base} vs {rotated}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frechet_non_negative(seed in any::<u64>(), d in 1usize..6, rank in 0usize..6) {
        let mut r = rng(seed);
        let low = |r: &mut rand::rngs::StdRng| {
            let a = DMatrix::from_fn(d, rank.min(d), |_, _| r.random_range(-1.0..1.0));
            let m = &a * a.transpose();
            row_major(&((&m + m.transpose()) * 0.5))
        };
        let (c1, c2) = (low(&mut r), low(&mut r));
        let m = random_rows(&mut r, 2, d);
        let s = frechet_distance(&gauss(m[0].clone(), c1), &gauss(m[1].clone(), c2)).unwrap();
        prop_assert!(s.distance >= 0.0);
    }

    #[test]
    fn ssim_is_symmetric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut img = || RgbImage::from_fn(16, 16, |_, _| Rgb([r.random(), r.random(), r.random()]));
        let (a, b) = (img(), img());
        prop_assert_eq!(ssim(&a, &b, &params()).unwrap(), ssim(&b, &a, &params()).unwrap());
    }

    #[test]
    fn psnr_decreases_with_error(base in 0u8..=100, e1 in 1u8..=50, extra in 1u8..=50) {
        let a = RgbImage::from_pixel(8, 8, Rgb([base; 3]));
        let b = RgbImage::from_pixel(8, 8, Rgb([base + e1; 3]));
        let c = RgbImage::from_pixel(8, 8, Rgb([base + e1 + extra; 3]));
        prop_assert!(psnr::<f64>(&a, &c).unwrap() < psnr::<f64>(&a, &b).unwrap());
    }

    #[test]
    fn csim_scale_invariant(seed in any::<u64>(), sa in 0.01f64..100.0, sb in 0.01f64..100.0) {
        let mut r = rng(seed);
        let v = random_rows(&mut r, 2, 12);
        let base = csim(&v[0], &v[1]).unwrap();
        let a: Vec<f64> = v[0].iter().map(|x| x * sa).collect();
        let b: Vec<f64> = v[1].iter().map(|x| x * sb).collect();
        prop_assert!((csim(&a, &b).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn lmd_translation(seed in any::<u64>(), dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let mut r = rng(seed);
        let gt = landmarks(&mut r, 6);
        let gen = gt.map_points(|[x, y]| [x + dx.signum() * r.random_range(0.0..2.0), y + dy.signum() * r.random_range(0.0..2.0)]);
        let opts = LmdOptions::default();
        let base = lmd(&gen, &gt, &opts).unwrap().distance;
        let both = lmd(&gen.map_points(|[x, y]| [x + 7.0, y - 3.0]), &gt.map_points(|[x, y]| [x + 7.0, y - 3.0]), &opts).unwrap().distance;
        prop_assert!((both - base).abs() < 1e-9);
        let moved = lmd(&gen.map_points(|[x, y]| [x + dx, y + dy]), &gt, &opts).unwrap().distance;
        prop_assert!((moved - base - (dx.abs() + dy.abs())).abs() < 1e-9);
    }
}

fn landmarks(r: &mut rand::rngs::StdRng, frames: usize) -> LandmarkTrack<f64> {
    let fr = (0..frames).map(|_| Some((0..68).map(|_| [r.random_range(0.0..100.0), r.random_range(0.0..100.0)]).collect())).collect();
    LandmarkTrack::new("ibug68", 68, MOUTH_68.collect(), fr).unwrap()
}

#[test]
fn lmd_examples_and_oracle() {
    let mut r = rng(17);
    let gt = landmarks(&mut r, 5);
    assert_eq!(lmd(&gt, &gt, &LmdOptions::default()).unwrap().distance, 0.0);
    let shifted = gt.map_points(|[x, y]| [x + 1.0, y + 1.0]);
    assert!((lmd(&shifted, &gt, &LmdOptions::default()).unwrap().distance - 2.0).abs() < 1e-12);
    let noisy = gt.map_points(|[x, y]| [x + r.random_range(-3.0..3.0), y + r.random_range(-3.0..3.0)]);
    let mut total = 0.0;
    for f in 0..5 {
        let (a, b) = (noisy.frames()[f].as_ref().unwrap(), gt.frames()[f].as_ref().unwrap());
        let mut per = 0.0;
        for i in 48..68 {
            per += (a[i][0] - b[i][0]).abs() + (a[i][1] - b[i][1]).abs();
        }
        total += per / 20.0;
    }
    assert!((lmd(&noisy, &gt, &LmdOptions::default()).unwrap().distance - total / 5.0).abs() < 1e-12);
}

#[test]
fn lmd_drops_missing_frames_pairwise() {
    let mut r = rng(18);
    let gt = landmarks(&mut r, 4);
    let mut frames = gt.frames().to_vec();
    frames[1] = None;
    let gen = LandmarkTrack::new("ibug68", 68, MOUTH_68.collect(), frames).unwrap().map_points(|[x, y]| [x + 1.0, y]);
    let s = lmd(&gen, &gt, &LmdOptions::default()).unwrap();
    assert_eq!((s.frames_used, s.frames_excluded), (3, 1));
    assert!((s.distance - 1.0).abs() < 1e-12);
}

#[test]
fn csim_examples() {
    assert!((csim(&[1.0f64, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(csim(&[1.0f64, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
    assert!((csim(&[1.0f64, -2.0], &[-1.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
    let t = track64(TrackKind::Identity, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert!((csim_against(&t, &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}
