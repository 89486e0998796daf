//! Brute-force reference computations shared by the integration tests.
//! They work from the dense matrix `A` directly and avoid the library's
//! search and eigen shortcuts.
#![allow(dead_code)]

use embedlab_core::embedding::{build_embedding, EmbeddingMatrix};
use embedlab_core::rng::stream;
use embedlab_core::vector_models::{RandomVectorModel, VectorKind};
use nalgebra::DMatrix;

pub fn random_matrix(kind: VectorKind, m: usize, n: usize, seed: u64) -> EmbeddingMatrix {
    let model = RandomVectorModel::new(kind, m, seed);
    build_embedding(&model, n, &mut stream(seed)).unwrap()
}

/// All subsets of `items` with `1 <= size <= max`.
pub fn subsets_up_to(items: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let n = items.len();
    for mask in 1u64..(1u64 << n) {
        if (mask.count_ones() as usize) <= max {
            out.push((0..n).filter(|k| mask >> k & 1 == 1).map(|k| items[k]).collect());
        }
    }
    out
}

pub fn columns(a: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    a.select_columns(s)
}

pub fn sigma_max(b: &DMatrix<f64>) -> f64 {
    b.clone().svd(false, false).singular_values.max()
}

/// `max |<Ax, Ay>|` over supports of every size up to `ell`, from SVDs of
/// `A[:, S1]^T A[:, S2]`.
pub fn overlap_oracle(a: &DMatrix<f64>, set: &[usize], comp: &[usize], ell: usize) -> f64 {
    if set.is_empty() || comp.is_empty() {
        return 0.0;
    }
    let mut best = 0.0f64;
    let right = subsets_up_to(comp, ell);
    for s1 in subsets_up_to(set, ell) {
        let a1 = columns(a, &s1);
        for s2 in &right {
            let b = a1.transpose() * columns(a, s2);
            best = best.max(sigma_max(&b));
        }
    }
    best
}

/// `max |Ax|_2` over unit `x` supported on at most `ell` indices of `set`.
pub fn sparse_norm_oracle(a: &DMatrix<f64>, set: &[usize], ell: usize) -> f64 {
    subsets_up_to(set, ell)
        .iter()
        .map(|s| sigma_max(&columns(a, s)))
        .fold(0.0, f64::max)
}

/// Split of `0..n` by the bits of `bits`.
pub fn split(n: usize, bits: u64) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|&i| bits >> i & 1 == 1)
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
