//! Brute-force references used by the suites. They work on the dense matrix
//! entries and plain loops, sharing no search or eigen code with the library.

use embedlab_core::embedding::{EmbeddingMatrix, SignVector};

fn col_dot(a: &EmbeddingMatrix, i: usize, j: usize) -> f64 {
    a.column(i).iter().zip(a.column(j)).map(|(x, y)| x * y).sum()
}

/// `max_i | |Ae_i|^2 - 1 |` from the raw entries.
pub fn column_deviation(a: &EmbeddingMatrix) -> f64 {
    (0..a.n()).map(|i| (col_dot(a, i, i) - 1.0).abs()).fold(0.0, f64::max)
}

/// Extreme singular values through a full SVD.
pub fn extreme_singular_values(a: &EmbeddingMatrix) -> (f64, f64) {
    let sv = a.entries().clone().svd(false, false).singular_values;
    let min = if a.m() < a.n() { 0.0 } else { sv.min() };
    (min, sv.max())
}

/// `4 E_eta sum_{i in I, j notin I} eps_i eps_j u_i u_j <Ae_i, Ae_j>` by enumerating all `2^n` selector patterns.
pub fn four_expected_v(a: &EmbeddingMatrix, eps: &SignVector, u: &[f64]) -> f64 {
    let n = a.n();
    let su: Vec<f64> = (0..n).map(|i| eps.get(i) * u[i]).collect();
    let gram: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| col_dot(a, i, j)).collect()).collect();
    let mut total = 0.0;
    for bits in 0u64..(1u64 << n) {
        let mut v = 0.0;
        for i in (0..n).filter(|i| bits >> i & 1 == 1) {
            for j in (0..n).filter(|j| bits >> j & 1 == 0) {
                v += su[i] * su[j] * gram[i][j];
            }
        }
        total += v;
    }
    4.0 * total / (1u64 << n) as f64
}

/// `max |y_S|_2` over `S` inside `set` with `|S| <= ell`, enumerating subsets.
pub fn sparse_sphere_max(y: &[f64], set: &[usize], ell: usize) -> f64 {
    let k = set.len();
    let mut best = 0.0f64;
    for bits in 1u32..(1u32 << k) {
        if bits.count_ones() as usize > ell {
            continue;
        }
        let s: f64 = (0..k).filter(|b| bits >> b & 1 == 1).map(|b| y[set[b]] * y[set[b]]).sum();
        best = best.max(s);
    }
    best.sqrt()
}

/// `max sigma(A_{S1}^T A_{S2})` over `S1` inside `rows`, `S2` inside `cols`, sizes at most `ell`.
pub fn overlap(a: &EmbeddingMatrix, rows: &[usize], cols: &[usize], ell: usize) -> f64 {
    let subsets = |items: &[usize]| -> Vec<Vec<usize>> {
        (1u32..(1u32 << items.len()))
            .filter(|b| b.count_ones() as usize <= ell)
            .map(|b| (0..items.len()).filter(|i| b >> i & 1 == 1).map(|i| items[i]).collect())
            .collect()
    };
    let right = subsets(cols);
    let mut best = 0.0f64;
    for s1 in subsets(rows) {
        for s2 in &right {
            let block = a.entries().select_columns(&s1).transpose() * a.entries().select_columns(s2);
            best = best.max(block.svd(false, false).singular_values.max());
        }
    }
    best
}
