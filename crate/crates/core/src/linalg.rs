//! Small dense helpers shared by the statistics modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Largest eigenvalue and a unit eigenvector of a symmetric matrix.
pub(crate) fn top_eigenpair(c: DMatrix<f64>) -> (f64, DVector<f64>) {
    if c.nrows() == 1 {
        return (c[(0, 0)], DVector::from_element(1, 1.0));
    }
    let eig = SymmetricEigen::new(c);
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Top singular triple of the block `g[rows, cols]`.
///
/// The block is oriented canonically (the support holding the smallest index
/// becomes the row side) so that `block(rows, cols)` and `block(cols, rows)`
/// of a symmetric `g` follow the same floating-point path.
pub(crate) struct BlockSingular {
    pub sigma: f64,
    /// Unit weights over `rows`.
    pub left: Vec<f64>,
    /// Unit weights over `cols`.
    pub right: Vec<f64>,
}

pub(crate) fn block_sigma(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    block_singular_impl(g, rows, cols, false).sigma
}

pub(crate) fn block_singular(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> BlockSingular {
    block_singular_impl(g, rows, cols, true)
}

fn block_singular_impl(
    g: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    vectors: bool,
) -> BlockSingular {
    if rows.is_empty() || cols.is_empty() {
        return BlockSingular {
            sigma: 0.0,
            left: vec![0.0; rows.len()],
            right: vec![0.0; cols.len()],
        };
    }
    let swapped = rows[0] > cols[0];
    let (r, c) = if swapped { (cols, rows) } else { (rows, cols) };
    let b = DMatrix::from_fn(r.len(), c.len(), |i, j| g[(r[i], c[j])]);
    let (sigma, u, v) = if r.len() <= c.len() {
        let gram = &b * b.transpose();
        let (lam, u) = top_eigenpair(gram);
        let sigma = lam.max(0.0).sqrt();
        let v = if vectors && sigma > 0.0 {
            (b.transpose() * &u) / sigma
        } else {
            DVector::zeros(c.len())
        };
        (sigma, u, v)
    } else {
        let gram = b.transpose() * &b;
        let (lam, v) = top_eigenpair(gram);
        let sigma = lam.max(0.0).sqrt();
        let u = if vectors && sigma > 0.0 {
            (&b * &v) / sigma
        } else {
            DVector::zeros(r.len())
        };
        (sigma, u, v)
    };
    let (mut left, mut right): (Vec<f64>, Vec<f64>) = if swapped {
        (v.iter().copied().collect(), u.iter().copied().collect())
    } else {
        (u.iter().copied().collect(), v.iter().copied().collect())
    };
    if vectors && sigma == 0.0 {
        // Any unit pair attains zero.
        left = vec![0.0; rows.len()];
        right = vec![0.0; cols.len()];
        left[0] = 1.0;
        right[0] = 1.0;
    }
    BlockSingular { sigma, left, right }
}

/// Largest eigenvalue of the principal submatrix `g[support, support]`, with eigenvector.
pub(crate) fn principal_top(g: &DMatrix<f64>, support: &[usize]) -> (f64, Vec<f64>) {
    if support.is_empty() {
        return (0.0, Vec::new());
    }
    let sub = DMatrix::from_fn(support.len(), support.len(), |i, j| g[(support[i], support[j])]);
    let (lam, v) = top_eigenpair(sub);
    (lam, v.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn block_singular_matches_full_svd() {
        let g = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + (i + j) as f64 * 0.1);
        let g = (&g + g.transpose()) * 0.5;
        let rows = [0, 2];
        let cols = [1, 3, 4];
        let b = DMatrix::from_fn(2, 3, |i, j| g[(rows[i], cols[j])]);
        let svd = b.clone().svd(false, false);
        let expected = svd.singular_values.max();
        let bs = block_singular(&g, &rows, &cols);
        assert_abs_diff_eq!(bs.sigma, expected, epsilon = 1e-12);
        // certificate attains the value
        let val: f64 = (0..2)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| bs.left[i] * b[(i, j)] * bs.right[j])
            .sum();
        assert_abs_diff_eq!(val, expected, epsilon = 1e-12);
        assert_eq!(block_sigma(&g, &rows, &cols), block_sigma(&g, &cols, &rows));
    }
}
