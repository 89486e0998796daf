mod common;

use common::{overlap_oracle, random_matrix, sparse_norm_oracle, split, subsets_up_to};
use embedlab_core::embedding::{gram, GramMatrix, SelectorMode};
use embedlab_core::rng::stream;
use embedlab_core::sparse_overlap::{
    dimension_reduction_check, fit_assumption_constant, order_statistic_tail_check,
    overlap_stat, rearrangement_norm, rearrangement_slice, self_bounding_check, sparse_operator_norm,
    selector_average, OrderTailConfig, SearchOptions, Strategy,
};
use embedlab_core::subset::IndexSet;
use embedlab_core::vector_models::{RandomVectorModel, VectorKind};
use nalgebra::DMatrix;
use rand::Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn instance(m: usize, n: usize, seed: u64) -> (DMatrix<f64>, GramMatrix) {
    let a = random_matrix(VectorKind::Gaussian, m, n, seed);
    let g = gram(&a);
    (a.into_entries(), g)
}

fn random_split(n: usize, seed: u64) -> (IndexSet, Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed ^ 0xabc);
    loop {
        let bits: u64 = rng.random_range(0..1u64 << n);
        let (i, c) = split(n, bits);
        if !i.is_empty() && !c.is_empty() {
            return (IndexSet::from_indices(n, &i).unwrap(), i, c);
        }
    }
}

#[test]
fn rearrangement_matches_sorted_brute_force() {
    let mut rng = stream(1);
    for _ in 0..50 {
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
        for ell in 1..=9 {
            let brute = subsets_up_to(&(0..9).collect::<Vec<_>>(), ell)
                .iter()
                .map(|s| s.iter().map(|&i| y[i] * y[i]).sum::<f64>())
                .fold(0.0, f64::max)
                .sqrt();
            assert!(close(rearrangement_norm(&y, ell), brute));
        }
        let full = rearrangement_norm(&y, 4);
        let parts = rearrangement_slice(&y, 0, 2).powi(2) + rearrangement_slice(&y, 2, 4).powi(2);
        assert!(close(full * full, parts));
    }
}

#[test]
fn exhaustive_matches_oracle() {
    for seed in 0..20 {
        let (a, g) = instance(5, 8, seed);
        let (set, i, c) = random_split(8, seed);
        for ell in 1..=3 {
            let stat = overlap_stat(&g, &set, ell, &SearchOptions::exhaustive()).unwrap();
            assert!(stat.is_exact);
            assert!(close(stat.value, overlap_oracle(&a, &i, &c, ell)), "seed {seed} ell {ell}");
            assert!(close(stat.certificate.value_in(&g), stat.value));
        }
    }
}

#[test]
fn heuristics_never_exceed_exhaustive() {
    for seed in 0..20 {
        let (_, g) = instance(6, 10, seed);
        let (set, _, _) = random_split(10, seed);
        let exact = overlap_stat(&g, &set, 3, &SearchOptions::exhaustive()).unwrap().value;
        for strategy in [Strategy::Greedy, Strategy::LocalSearch, Strategy::RandomRestart] {
            let h = overlap_stat(&g, &set, 3, &SearchOptions::heuristic(strategy).with_seed(seed)).unwrap();
            assert!(!h.is_exact);
            assert!(h.value <= exact + 1e-12, "{strategy:?}");
            assert!(close(h.certificate.value_in(&g), h.value));
        }
    }
}

#[test]
fn random_restart_finds_the_optimum() {
    let mut hits = 0;
    for seed in 0..50 {
        let (_, g) = instance(6, 10, seed + 100);
        let (set, _, _) = random_split(10, seed);
        let exact = overlap_stat(&g, &set, 2, &SearchOptions::exhaustive()).unwrap().value;
        let h = overlap_stat(&g, &set, 2, &SearchOptions::default().with_seed(seed)).unwrap().value;
        if h >= exact * (1.0 - 1e-9) {
            hits += 1;
        }
    }
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn monte_carlo_selector_average_matches_enumeration() {
    let (_, g) = instance(6, 8, 3);
    let opts = SearchOptions::exhaustive().with_seed(4);
    let exact = selector_average(&g, 2, SelectorMode::ExactEnumeration, &opts).unwrap();
    assert!(exact.all_exact && exact.std_error == 0.0);
    let mc = selector_average(&g, 2, SelectorMode::MonteCarlo { samples: 4000 }, &opts).unwrap();
    assert!((mc.value - exact.value).abs() <= 3.0 * mc.std_error, "{} vs {}", mc.value, exact.value);
}

#[test]
fn permutation_symmetry() {
    let (_, g) = instance(5, 8, 5);
    let perm = [3usize, 7, 0, 5, 1, 6, 2, 4];
    let pg = DMatrix::from_fn(8, 8, |i, j| g.get(perm[i], perm[j]));
    let pg = GramMatrix::from_symmetric(pg).unwrap();
    let (set, i, _) = random_split(8, 6);
    let inv: Vec<usize> = i.iter().map(|&k| perm.iter().position(|&p| p == k).unwrap()).collect();
    let pset = IndexSet::from_indices(8, &inv).unwrap();
    let opts = SearchOptions::exhaustive();
    let a = overlap_stat(&g, &set, 2, &opts).unwrap().value;
    let b = overlap_stat(&pg, &pset, 2, &opts).unwrap().value;
    assert!(close(a, b));
}

#[test]
fn sparse_norm_search() {
    let mut hits = 0;
    for seed in 0..50 {
        let (a, g) = instance(8, 12, seed + 200);
        let full = IndexSet::full(12);
        let exact = sparse_operator_norm(&g, &full, 3, &SearchOptions::exhaustive()).unwrap();
        if seed < 10 {
            let oracle = sparse_norm_oracle(&a, &(0..12).collect::<Vec<_>>(), 3);
            assert!(close(exact.value, oracle));
            assert!(close(exact.value_in(&g), exact.value));
        }
        let ls = sparse_operator_norm(&g, &full, 3, &SearchOptions::heuristic(Strategy::LocalSearch).with_seed(seed))
            .unwrap()
            .value;
        assert!(ls <= exact.value + 1e-12);
        if ls >= exact.value * (1.0 - 1e-9) {
            hits += 1;
        }
    }
    assert!(hits >= 45, "{hits}/50");
}

#[test]
fn structural_relations() {
    let opts = SearchOptions::exhaustive();
    for seed in 0..10 {
        let (_, g) = instance(5, 9, seed + 300);
        let (set, _, _) = random_split(9, seed);
        let comp = set.complement();
        let mut prev = 0.0;
        for ell in 1..=4 {
            let o = overlap_stat(&g, &set, ell, &opts).unwrap().value;
            let oc = overlap_stat(&g, &comp, ell, &opts).unwrap().value;
            assert!(close(o, oc));
            let m1 = sparse_operator_norm(&g, &set, ell, &opts).unwrap().value;
            let m2 = sparse_operator_norm(&g, &comp, ell, &opts).unwrap().value;
            assert!(o <= m1 * m2 + 1e-12);
            assert!(o >= prev - 1e-12);
            prev = o;
        }
    }
}

#[test]
fn assumption_constant_scales_quadratically() {
    let (_, g) = instance(6, 8, 7);
    let opts = SearchOptions::exhaustive();
    let fit = fit_assumption_constant(&g, 2.0, 6, SelectorMode::ExactEnumeration, &opts).unwrap();
    let fit2 = fit_assumption_constant(&g.scaled(4.0), 2.0, 6, SelectorMode::ExactEnumeration, &opts).unwrap();
    assert!(close(fit2.c_a, 4.0 * fit.c_a));
    assert_eq!(fit.per_scale.len(), 4);
    for f in &fit.per_scale {
        assert!(f.o_value <= fit.c_a * f.bound_shape + 1e-12);
    }
}

#[test]
fn dimension_reduction_recursion() {
    for seed in 0..20 {
        let (_, g) = instance(6, 10, seed + 400);
        let (set, _, _) = random_split(10, seed);
        let rep = dimension_reduction_check(&g, &set, 2, 1_000_000).unwrap();
        assert!(rep.all_hold, "seed {seed}: {:?}", rep.scales);
        for sc in &rep.scales {
            assert!(sc.o_current >= sc.o_previous - 1e-12);
            assert!(sc.o_mixed <= sc.o_current + 1e-12);
        }
    }
}

#[test]
fn self_bounding() {
    let opts = SearchOptions::exhaustive();
    for seed in 0..30 {
        let (a, g) = instance(6, 8, seed + 500);
        let rep = self_bounding_check(&g, SelectorMode::ExactEnumeration, &opts).unwrap();
        assert!(rep.all_hold, "seed {seed}");
        let dev = (0..8).map(|i| (a.column(i).norm_squared() - 1.0).abs()).fold(0.0, f64::max);
        assert!(close(rep.delta_observed, dev));
    }
    let (_, g) = instance(6, 8, 9);
    let r1 = self_bounding_check(&g, SelectorMode::ExactEnumeration, &opts).unwrap();
    let r2 = self_bounding_check(&g.scaled(9.0), SelectorMode::ExactEnumeration, &opts).unwrap();
    for (x, y) in r1.scales.iter().zip(&r2.scales) {
        assert!(close(y.m_sq, 9.0 * x.m_sq));
        assert!(close(y.o_value, 9.0 * x.o_value));
    }
}

fn tail_cfg(c3: Option<f64>) -> OrderTailConfig {
    OrderTailConfig {
        n: 4,
        collection_size: 1,
        s: 2,
        alpha: 2.0,
        l_const: 1.5,
        r_const: 6.0,
        c3,
        mc_trials: 2000,
    }
}

#[test]
fn order_statistic_tail() {
    let model = RandomVectorModel::new(VectorKind::Gaussian, 3, 11);
    let e = std::f64::consts::E;
    // with 2^s = n the statistic is min |Z_i|, and the threshold is exactly 1
    let rep = order_statistic_tail_check(&model, &tail_cfg(Some(1.0 / e)), &[e]).unwrap();
    assert!((rep.points[0].threshold - 1.0).abs() < 1e-12);
    assert!(rep.points[0].rate <= 0.5);
    // P(min of four |g| > 1) = P(|g| > 1)^4
    let p = (1.0 - 0.682_689_492_137_086f64).powi(4);
    assert!((rep.points[0].rate - p).abs() <= 4.0 * (p * (1.0 - p) / 2000.0).sqrt());

    let rep = order_statistic_tail_check(&model, &tail_cfg(Some(0.2)), &[e, 4.0, 6.0]).unwrap();
    assert!(rep.monotone);
    let rep = order_statistic_tail_check(&model, &tail_cfg(None), &[e]).unwrap();
    assert!(close(rep.c3, 1.5 * 6f64.sqrt()));
    assert!(order_statistic_tail_check(&model, &tail_cfg(None), &[2.0]).is_err());
    let again = order_statistic_tail_check(&model, &tail_cfg(None), &[e]).unwrap();
    assert_eq!(rep, again);
}
