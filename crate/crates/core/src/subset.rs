use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// A subset `I` of `{0, .., n-1}` stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    mask: Vec<bool>,
}

impl IndexSet {
    pub fn empty(n: usize) -> Self {
        Self {
            mask: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            mask: vec![true; n],
        }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(crate::Error::Dimension {
                    context: "index set",
                    expected: n,
                    found: i + 1,
                });
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    /// Bit `i` of `bits` decides membership of `i`; requires `n <= 64`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        assert!(n <= 64, "bit patterns cover at most 64 indices");
        Self {
            mask: (0..n).map(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn ambient(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|&b| !b).collect(),
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub(crate) fn check_ambient(&self, n: usize) -> Result<()> {
        check_dim("index set", n, self.mask.len())
    }
}

/// All k-element subsets of `items`, in lexicographic order of positions.
pub(crate) fn for_each_combination(items: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut pos: Vec<usize> = (0..k).collect();
    let mut current: Vec<usize> = pos.iter().map(|&p| items[p]).collect();
    loop {
        f(&current);
        let mut i = k;
        while i > 0 && pos[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        pos[i - 1] += 1;
        for j in i..k {
            pos[j] = pos[j - 1] + 1;
        }
        for j in i - 1..k {
            current[j] = items[pos[j]];
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_complete() {
        let items = [2, 5, 7, 9, 11];
        let mut seen = Vec::new();
        for_each_combination(&items, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![2, 5, 7]);
        assert_eq!(seen[9], vec![7, 9, 11]);
        let mut empty = 0;
        for_each_combination(&items, 0, |_| empty += 1);
        assert_eq!(empty, 1);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(4, 5), 0);
    }

    #[test]
    fn bits_and_complement() {
        let s = IndexSet::from_bits(4, 0b1010);
        assert_eq!(s.indices(), vec![1, 3]);
        assert_eq!(s.complement().indices(), vec![0, 2]);
        assert!(IndexSet::from_indices(3, &[3]).is_err());
    }
}
