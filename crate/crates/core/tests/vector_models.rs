mod common;

use common::{ks_statistic, mean_and_se};
use embedlab_core::rng::stream;
use embedlab_core::vector_models::{
    estimate_moment_equivalence, estimate_suitability, estimate_thin_shell, Direction, RandomVectorModel,
    SuitabilityConfig, VectorKind,
};
use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF, Laplace, Normal, StudentsT, Uniform};
use statrs::function::gamma::gamma;

fn draws(model: &RandomVectorModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let sampler = model.sampler().unwrap();
    let mut rng = stream(seed);
    (0..count).map(|_| sampler.draw(&mut rng)).collect()
}

/// Value of delta with `P(max_{i <= n} |chi2_m/m - 1| <= delta) = level`.
fn chi_square_shell_quantile(m: usize, n: usize, level: f64) -> f64 {
    let chi = ChiSquared::new(m as f64).unwrap();
    let single = level.powf(1.0 / n as f64);
    let mf = m as f64;
    let coverage = |d: f64| chi.cdf(mf * (1.0 + d)) - chi.cdf((mf * (1.0 - d)).max(0.0));
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if coverage(mid) < single {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn gaussian_thin_shell_matches_chi_square_quantile() {
    let model = RandomVectorModel::new(VectorKind::Gaussian, 1000, 11);
    let est = estimate_thin_shell(&model, 100, 1000, 0.05).unwrap();
    let oracle = chi_square_shell_quantile(1000, 100, 0.95);
    assert!(
        (est.delta_hat - oracle).abs() <= 0.1 * oracle,
        "estimate {} vs chi-square quantile {oracle}",
        est.delta_hat
    );
    assert!(est.quantile_band.0 <= est.delta_hat && est.delta_hat <= est.quantile_band.1);
}

#[test]
fn thin_shell_at_one_percent() {
    let g = RandomVectorModel::new(VectorKind::Gaussian, 1000, 12);
    assert!(estimate_thin_shell(&g, 100, 400, 0.01).unwrap().delta_hat <= 0.5);
    let e = RandomVectorModel::new(VectorKind::ProductExponential, 1000, 13);
    assert!(estimate_thin_shell(&e, 100, 400, 0.01).unwrap().delta_hat <= 0.8);
}

#[test]
fn coordinate_laws_pass_kolmogorov_smirnov() {
    let n = 20_000;
    let crit = 1.628 / (n as f64).sqrt();
    let t_scale = (3.0f64 / 5.0).sqrt();
    let cases: Vec<(RandomVectorModel, Box<dyn Fn(f64) -> f64>)> = vec![
        (
            RandomVectorModel::new(VectorKind::Gaussian, 3, 1),
            Box::new(|x| Normal::new(0.0, 1.0).unwrap().cdf(x)),
        ),
        (
            RandomVectorModel::new(VectorKind::ProductExponential, 3, 2),
            Box::new(|x| Laplace::new(0.0, 1.0 / 2f64.sqrt()).unwrap().cdf(x)),
        ),
        (
            RandomVectorModel::new(VectorKind::ProductUniform, 3, 3),
            Box::new(|x| Uniform::new(-(3f64.sqrt()), 3f64.sqrt()).unwrap().cdf(x)),
        ),
        // a coordinate of a uniform point on S^2 is uniform on [-1, 1]
        (
            RandomVectorModel::new(VectorKind::ScaledSphere, 3, 4),
            Box::new(|x| Uniform::new(-(3f64.sqrt()), 3f64.sqrt()).unwrap().cdf(x)),
        ),
        (
            RandomVectorModel::new(VectorKind::StudentTControl, 3, 5).with_dof(5.0),
            Box::new(move |x| StudentsT::new(0.0, 1.0, 5.0).unwrap().cdf(x / t_scale)),
        ),
    ];
    for (model, cdf) in cases {
        for coord in 0..3 {
            let xs: Vec<f64> = draws(&model, n, model.seed).iter().map(|v| v[coord]).collect();
            let d = ks_statistic(xs, &cdf);
            assert!(d < crit, "{:?} coordinate {coord}: D = {d}", model.kind);
        }
    }
}

fn empirical_covariance(samples: &[Vec<f64>]) -> DMatrix<f64> {
    let m = samples[0].len();
    let x = DMatrix::from_fn(samples.len(), m, |i, j| samples[i][j]);
    x.transpose() * &x / samples.len() as f64
}

fn max_identity_deviation(c: &DMatrix<f64>) -> f64 {
    let id = DMatrix::<f64>::identity(c.nrows(), c.ncols());
    (c - id).amax()
}

#[test]
fn gaussian_covariance_near_identity() {
    let model = RandomVectorModel::new(VectorKind::Gaussian, 1000, 21);
    let c = empirical_covariance(&draws(&model, 10_000, 21));
    assert!(max_identity_deviation(&c) <= 0.15);
}

#[test]
fn covariance_error_shrinks_like_inverse_root() {
    for kind in [
        VectorKind::Gaussian,
        VectorKind::RademacherCoords,
        VectorKind::ScaledSphere,
        VectorKind::ProductExponential,
        VectorKind::ProductUniform,
    ] {
        let mut small = 0.0;
        let mut large = 0.0;
        for rep in 0..8u64 {
            let model = RandomVectorModel::new(kind, 8, 100 + rep);
            small += max_identity_deviation(&empirical_covariance(&draws(&model, 5_000, rep)));
            large += max_identity_deviation(&empirical_covariance(&draws(&model, 20_000, 50 + rep)));
        }
        let ratio = small / large;
        assert!((1.2..=3.0).contains(&ratio), "{kind}: ratio {ratio}");
    }
}

#[test]
fn odd_moments_vanish() {
    for kind in [
        VectorKind::Gaussian,
        VectorKind::RademacherCoords,
        VectorKind::ScaledSphere,
        VectorKind::ProductExponential,
        VectorKind::ProductUniform,
    ] {
        let model = RandomVectorModel::new(kind, 4, 31);
        let xs = draws(&model, 100_000, 31);
        for coord in 0..4 {
            for power in [1, 3] {
                let v: Vec<f64> = xs.iter().map(|x| x[coord].powi(power)).collect();
                let (mean, se) = mean_and_se(&v);
                assert!(mean.abs() <= 5.0 * se, "{kind} coordinate {coord} power {power}");
            }
        }
    }
}

#[test]
fn draws_are_reproducible() {
    for kind in VectorKind::ALL {
        let model = RandomVectorModel::new(kind, 5, 9).with_dof(4.0);
        assert_eq!(draws(&model, 50, 3), draws(&model, 50, 3));
        assert_ne!(draws(&model, 50, 3), draws(&model, 50, 4));
    }
}

fn gaussian_abs_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

#[test]
fn gaussian_moment_ratio_matches_gamma_formula() {
    let model = RandomVectorModel::new(VectorKind::Gaussian, 4, 41);
    let rep = estimate_moment_equivalence(&model, 2.0, &[4.0], 0, 200_000).unwrap();
    let expected = gaussian_abs_moment(4.0).powf(0.25) / 2.0;
    assert!((expected - 3f64.powf(0.25) / 2.0).abs() < 1e-12);
    for i in 0..4 {
        let r = rep.ratio(Direction::Basis(i), 4.0).unwrap();
        assert!((r - expected).abs() < 0.01, "basis {i}: {r} vs {expected}");
    }
}

#[test]
fn laplace_moment_ratio_matches_factorial_formula() {
    let model = RandomVectorModel::new(VectorKind::ProductExponential, 3, 42);
    let rep = estimate_moment_equivalence(&model, 1.0, &[4.0], 0, 200_000).unwrap();
    // E|Y|^p = p! 2^{-p/2}
    let expected = (24.0f64 / 4.0).powf(0.25) / 4.0;
    let r = rep.ratio(Direction::Basis(0), 4.0).unwrap();
    assert!((r - expected).abs() < 0.02, "{r} vs {expected}");
    assert!(r <= 1.0);
}

#[test]
fn l_hat_dominates_every_probed_ratio() {
    let model = RandomVectorModel::new(VectorKind::ProductUniform, 6, 43);
    let rep = estimate_moment_equivalence(&model, 2.0, &[2.0, 4.0, 8.0], 5, 20_000).unwrap();
    assert_eq!(rep.ratios.len(), (6 + 5) * 3);
    assert!(rep.ratios.iter().all(|r| r.ratio <= rep.l_hat));
    assert!(rep.ratios.iter().any(|r| r.ratio == rep.l_hat));
}

#[test]
fn heavy_tails_are_detected() {
    let g = RandomVectorModel::new(VectorKind::Gaussian, 4, 44);
    let t = RandomVectorModel::new(VectorKind::StudentTControl, 4, 44).with_dof(3.0);
    let lg = estimate_moment_equivalence(&g, 2.0, &[8.0], 4, 100_000).unwrap().l_hat;
    let lt = estimate_moment_equivalence(&t, 2.0, &[8.0], 4, 100_000).unwrap().l_hat;
    assert!(lt >= 2.0 * lg, "student-t {lt} vs gaussian {lg}");
}

#[test]
fn suitability_report_for_log_concave_model() {
    let model = RandomVectorModel::new(VectorKind::ProductExponential, 200, 45);
    let mut cfg = SuitabilityConfig::new(64, 1.0);
    cfg.mc_samples = 50_000;
    let rep = estimate_suitability(&model, &cfg).unwrap();
    assert!(!rep.delta_violation);
    assert!(rep.delta_hat > 0.0 && rep.delta_hat < 1.0);
    assert_eq!(rep.p_grid, vec![2.0, 4.0, 8.0, 16.0]);
    assert!(rep.l_hat > 0.0 && rep.l_hat.is_finite());
    let sphere = RandomVectorModel::new(VectorKind::ScaledSphere, 50, 46);
    assert!(estimate_suitability(&sphere, &SuitabilityConfig::new(16, 2.0)).unwrap().delta_hat <= 1e-9);
}
