use embedlab_core::decoupling::{compute_v, compute_w, compute_z};
use embedlab_core::distortion::{distortion, evaluate_main_bound, BoundName};
use embedlab_core::embedding::{gram, randomize_columns, EmbeddingMatrix, GramMatrix, SignVector};
use embedlab_core::set_geometry::{build_admissible_sequence, level_capacity, SetDescriptor};
use embedlab_core::sparse_overlap::{
    overlap_stat, rearrangement_norm, rearrangement_tail, SearchOptions, Strategy as Search,
};
use embedlab_core::subset::IndexSet;
use embedlab_core::vector_models::VectorKind;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn gram_strategy(m: usize, n: usize) -> impl Strategy<Value = GramMatrix> {
    vec_strategy(m * n).prop_map(move |v| {
        gram(&EmbeddingMatrix::from_matrix(DMatrix::from_vec(m, n, v)))
    })
}

fn split_strategy(n: usize) -> impl Strategy<Value = IndexSet> {
    (1u64..(1u64 << n) - 1).prop_map(move |bits| IndexSet::from_bits(n, bits))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rearrangement_pythagoras(y in vec_strategy(11), ell in 0usize..12) {
        let total: f64 = y.iter().map(|x| x * x).sum();
        let split = rearrangement_norm(&y, ell).powi(2) + rearrangement_tail(&y, ell).powi(2);
        prop_assert!((split - total).abs() <= 1e-12 * (1.0 + total));
    }

    #[test]
    fn heuristics_are_lower_bounds(
        g in gram_strategy(4, 8),
        set in split_strategy(8),
        ell in 1usize..4,
        seed in any::<u64>(),
    ) {
        let exact = overlap_stat(&g, &set, ell, &SearchOptions::exhaustive()).unwrap().value;
        for s in [Search::Greedy, Search::LocalSearch, Search::RandomRestart] {
            let opts = SearchOptions::heuristic(s).with_seed(seed).with_restarts(5);
            let h = overlap_stat(&g, &set, ell, &opts).unwrap();
            prop_assert!(h.value <= exact + 1e-12);
            prop_assert!((h.certificate.value_in(&g) - h.value).abs() <= 1e-9 * (1.0 + h.value));
        }
    }

    #[test]
    fn overlap_complement_symmetry(g in gram_strategy(4, 7), set in split_strategy(7), ell in 1usize..4) {
        let opts = SearchOptions::exhaustive();
        let a = overlap_stat(&g, &set, ell, &opts).unwrap().value;
        let b = overlap_stat(&g.transpose(), &set.complement(), ell, &opts).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn chaos_degrees(
        g in gram_strategy(3, 6),
        signs in prop::collection::vec(prop::bool::ANY, 6),
        bits in 0u64..64,
        u in vec_strategy(6),
        v in vec_strategy(6),
        lam in -3.0f64..3.0,
    ) {
        let eps = SignVector::from_values(signs.iter().map(|&b| if b { 1 } else { -1 }).collect()).unwrap();
        let set = IndexSet::from_bits(6, bits);
        let tol = |x: f64| 1e-9 * (1.0 + x.abs());
        let lu: Vec<f64> = u.iter().map(|x| lam * x).collect();
        let z = compute_z(&g, &eps, &u).unwrap();
        prop_assert!((compute_z(&g, &eps, &lu).unwrap() - lam * lam * z).abs() <= tol(z) * (1.0 + lam * lam));
        let w = compute_w(&g, &eps, &set, &u).unwrap();
        let lw = compute_w(&g, &eps, &set, &lu).unwrap();
        for (a, b) in w.iter().zip(&lw) {
            prop_assert!((lam * a - b).abs() <= tol(*b) * (1.0 + lam.abs()));
        }
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = compute_v(&g, &eps, &set, &u, &sum).unwrap();
        let rhs = compute_v(&g, &eps, &set, &u, &u).unwrap() + compute_v(&g, &eps, &set, &u, &v).unwrap();
        prop_assert!((lhs - rhs).abs() <= tol(lhs) * 10.0);
    }

    #[test]
    fn identity_has_no_distortion(n in 2usize..7, pts in prop::collection::vec(vec_strategy(6), 1..10)) {
        let a = EmbeddingMatrix::identity(n);
        let cloud: Vec<Vec<f64>> = pts.iter().map(|p| p[..n].to_vec()).collect();
        let sets = [
            SetDescriptor::finite_cloud(cloud).unwrap(),
            SetDescriptor::unit_sphere(n).unwrap(),
            SetDescriptor::sparse_sphere(n, (0..n).collect(), 2).unwrap(),
            SetDescriptor::ellipsoid(vec![1.5; n]).unwrap(),
        ];
        for t in &sets {
            prop_assert_eq!(distortion(&a, t, 1_000_000).unwrap().empirical, 0.0);
        }
    }

    #[test]
    fn greedy_sequences_are_admissible(pts in prop::collection::vec(vec_strategy(3), 1..40)) {
        let seq = build_admissible_sequence(&pts).unwrap();
        prop_assert!(seq.is_admissible());
        for s in 0..=seq.stabilization_level() {
            prop_assert!(seq.level_size(s) <= level_capacity(s));
        }
        for t in 0..pts.len() {
            // t = pi_0 t + sum of increments
            let mut acc = seq.projection(0, t).to_vec();
            for s in 0..seq.stabilization_level() {
                for (a, d) in acc.iter_mut().zip(seq.increment(s, t)) {
                    *a += d;
                }
            }
            for (a, b) in acc.iter().zip(&pts[t]) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn sign_randomization_is_an_involution(
        entries in vec_strategy(12),
        signs in prop::collection::vec(prop::bool::ANY, 4),
    ) {
        let a = EmbeddingMatrix::from_matrix(DMatrix::from_vec(3, 4, entries));
        let eps = SignVector::from_values(signs.iter().map(|&b| if b { 1 } else { -1 }).collect()).unwrap();
        let twice = randomize_columns(&randomize_columns(&a, &eps).unwrap(), &eps).unwrap();
        prop_assert_eq!(twice.entries(), a.entries());
    }

    #[test]
    fn bounds_recompute(
        d in 0.1f64..5.0,
        l in 0.1f64..5.0,
        k in 0.5f64..50.0,
        m in 1usize..500,
        n in 1usize..500,
        delta in 0.0f64..1.0,
        alpha in 0.2f64..2.0,
    ) {
        let b = evaluate_main_bound(d, l, k, m, n, delta, alpha, 1.0);
        prop_assert_eq!(b.name, BoundName::MainTheorem);
        let r = b.recompute().unwrap();
        prop_assert!((r - b.value).abs() <= 1e-12 * b.value.abs().max(1.0));
    }
}

#[test]
fn kinds_roundtrip_through_names() {
    for kind in VectorKind::ALL {
        assert_eq!(kind.name().parse::<VectorKind>().unwrap(), kind);
    }
}
