mod common;

use common::{ks_two_sample, random_matrix};
use embedlab_core::decoupling::compute_z;
use embedlab_core::embedding::{
    build_embedding, column_norm_deviation, gram, randomize_columns, SignVector,
};
use embedlab_core::rng::stream;
use embedlab_core::vector_models::{RandomVectorModel, VectorKind};
use nalgebra::DVector;
use rand::Rng;

#[test]
fn mean_column_norm_is_one() {
    let model = RandomVectorModel::new(VectorKind::Gaussian, 200, 1);
    let mut rng = stream(1);
    let mean = (0..100)
        .map(|_| build_embedding(&model, 50, &mut rng).unwrap().column_norm_sq(0))
        .sum::<f64>()
        / 100.0;
    assert!((0.97..=1.03).contains(&mean), "{mean}");
}

#[test]
fn sign_randomization_preserves_inner_product_law() {
    let model = RandomVectorModel::new(VectorKind::ProductExponential, 10, 2);
    let mut rng = stream(2);
    let samples = 10_000;
    let mut plain = Vec::with_capacity(samples);
    let mut signed = Vec::with_capacity(samples);
    for k in 0..samples {
        let a = build_embedding(&model, 2, &mut rng).unwrap();
        plain.push(gram(&a).get(0, 1));
        let b = build_embedding(&model, 2, &mut rng).unwrap();
        let eps = SignVector::random(2, k as u64);
        signed.push(gram(&randomize_columns(&b, &eps).unwrap()).get(0, 1));
    }
    let d = ks_two_sample(plain, signed);
    let crit = 1.628 * (2.0 / samples as f64).sqrt();
    assert!(d < crit, "D = {d}, critical {crit}");
}

#[test]
fn expansion_identity() {
    for seed in 0..20 {
        let a = random_matrix(VectorKind::Gaussian, 15, 12, seed);
        let g = gram(&a);
        let eps = SignVector::random(12, seed);
        let ae = randomize_columns(&a, &eps).unwrap();
        let mut rng = stream(seed + 100);
        let t: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = (ae.entries() * DVector::from_column_slice(&t)).norm_squared();
        let diag: f64 = (0..12).map(|i| a.column_norm_sq(i) * t[i] * t[i]).sum();
        let rhs = diag + compute_z(&g, &eps, &t).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

#[test]
fn gram_diagonal_and_symmetry() {
    let a = random_matrix(VectorKind::ProductUniform, 9, 14, 3);
    let g = gram(&a);
    for i in 0..14 {
        assert!((g.get(i, i) - a.column_norm_sq(i)).abs() <= 1e-12);
        for j in 0..14 {
            assert_eq!(g.get(i, j), g.get(j, i));
        }
    }
    let dense = a.entries().transpose() * a.entries();
    assert!((g.entries() - dense).amax() <= 1e-12);
}

#[test]
fn sign_invariance_of_column_deviation() {
    let a = random_matrix(VectorKind::RademacherCoords, 7, 20, 4);
    let eps = SignVector::random(20, 5);
    assert_eq!(
        column_norm_deviation(&randomize_columns(&a, &eps).unwrap()),
        column_norm_deviation(&a)
    );
}
