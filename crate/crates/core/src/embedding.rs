//! The column ensemble `A = (X_1, .., X_n) / sqrt(m)`, its sign and selector
//! randomizations, and the Gram matrix `G = A^T A`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::substream;
use crate::subset::IndexSet;
use crate::vector_models::RandomVectorModel;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    entries: DMatrix<f64>,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Wraps an arbitrary operator `R^n -> R^m` (no normalization applied).
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        Self {
            entries,
            normalized: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(DMatrix::identity(n, n))
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    /// True when built from sampled columns divided by `sqrt(m)`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.entries.as_slice()[i * m..(i + 1) * m]
    }

    pub fn column_norm_sq(&self, i: usize) -> f64 {
        self.column(i).iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * factor,
            normalized: false,
        }
    }

    pub fn apply(&self, t: &[f64]) -> Result<Vec<f64>> {
        check_dim("embedding input", self.n(), t.len())?;
        let mut out = vec![0.0; self.m()];
        for (i, &ti) in t.iter().enumerate() {
            if ti != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.column(i)) {
                    *o += a * ti;
                }
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_matrix_csv(&self.entries, writer)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        Ok(Self::from_matrix(read_matrix_csv(reader)?))
    }
}

/// Builds `A` with `n` i.i.d. columns `X_i / sqrt(m)`, drawn in column order from `rng`.
pub fn build_embedding<R: Rng + ?Sized>(
    model: &RandomVectorModel,
    n: usize,
    rng: &mut R,
) -> Result<EmbeddingMatrix> {
    if n == 0 {
        return Err(Error::Config("number of columns must be at least 1".into()));
    }
    let sampler = model.sampler()?;
    let m = model.dim;
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = vec![0.0; m * n];
    for col in data.chunks_mut(m) {
        sampler.fill(rng, col);
        col.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(EmbeddingMatrix {
        entries: DMatrix::from_vec(m, n, data),
        normalized: true,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignVector {
    values: Vec<i8>,
    seed: Option<u64>,
}

impl SignVector {
    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![1; n],
            seed: None,
        }
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = substream(seed, "signs", 0);
        Self {
            values: (0..n)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect(),
            seed: Some(seed),
        }
    }

    pub fn from_values(values: Vec<i8>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::Config(format!("sign entries must be +-1, found {bad}")));
        }
        Ok(Self { values, seed: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.values[i])
    }
}

/// i.i.d. `{0, 1}` selectors with mean 1/2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorVector {
    values: Vec<u8>,
    seed: Option<u64>,
}

impl SelectorVector {
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = substream(seed, "selectors", 0);
        Self::draw(n, &mut rng, Some(seed))
    }

    pub fn draw<R: Rng + ?Sized>(n: usize, rng: &mut R, seed: Option<u64>) -> Self {
        Self {
            values: (0..n).map(|_| u8::from(rng.random::<bool>())).collect(),
            seed,
        }
    }

    pub fn from_values(values: Vec<u8>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return Err(Error::Config(format!("selector entries must be 0 or 1, found {bad}")));
        }
        Ok(Self { values, seed: None })
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    /// `I_eta = { i : eta_i = 1 }`
    pub fn index_set(&self) -> IndexSet {
        IndexSet::from_mask(self.values.iter().map(|&v| v == 1).collect())
    }
}

/// How an expectation over selector patterns `eta` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorMode {
    /// All `2^n` patterns, each with weight `2^{-n}`.
    ExactEnumeration,
    MonteCarlo { samples: usize },
}

pub const EXACT_SELECTOR_MAX_N: usize = 16;

/// Mean of `f(I_eta, k)` over selector patterns; `k` indexes the pattern
/// (its bit encoding in exact mode, the draw number otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorMean {
    pub value: f64,
    pub std_error: f64,
    pub patterns: usize,
}

pub fn selector_mean<F>(n: usize, mode: SelectorMode, seed: u64, f: F) -> Result<SelectorMean>
where
    F: Fn(&IndexSet, u64) -> Result<f64> + Sync,
{
    let values: Vec<f64> = match mode {
        SelectorMode::ExactEnumeration => {
            if n > EXACT_SELECTOR_MAX_N {
                return Err(Error::Mode(format!(
                    "exact enumeration needs n <= {EXACT_SELECTOR_MAX_N}, got {n}"
                )));
            }
            (0..1u64 << n)
                .into_par_iter()
                .map(|bits| f(&IndexSet::from_bits(n, bits), bits))
                .collect::<Result<_>>()?
        }
        SelectorMode::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(Error::Mode("Monte Carlo selectors need at least 2 draws".into()));
            }
            (0..samples as u64)
                .into_par_iter()
                .map(|k| {
                    let mut rng = substream(seed, "selector_draw", k);
                    let eta = SelectorVector::draw(n, &mut rng, None);
                    f(&eta.index_set(), k)
                })
                .collect::<Result<_>>()?
        }
    };
    let count = values.len() as f64;
    let value = values.iter().sum::<f64>() / count;
    let std_error = match mode {
        SelectorMode::ExactEnumeration => 0.0,
        SelectorMode::MonteCarlo { .. } => {
            let var = values.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (count - 1.0);
            (var / count).sqrt()
        }
    };
    Ok(SelectorMean {
        value,
        std_error,
        patterns: values.len(),
    })
}

/// Column `i` of the result is `eps_i` times column `i` of `a`.
pub fn randomize_columns(a: &EmbeddingMatrix, eps: &SignVector) -> Result<EmbeddingMatrix> {
    check_dim("sign vector", a.n(), eps.len())?;
    let mut entries = a.entries.clone();
    for (i, mut col) in entries.column_iter_mut().enumerate() {
        if eps.values[i] < 0 {
            col.neg_mut();
        }
    }
    Ok(EmbeddingMatrix {
        entries,
        normalized: a.normalized,
    })
}

/// `max_i | |A e_i|^2 - 1 |`
pub fn column_norm_deviation(a: &EmbeddingMatrix) -> f64 {
    (0..a.n())
        .map(|i| (a.column_norm_sq(i) - 1.0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a symmetric matrix; the upper triangle is mirrored so the result is exactly symmetric.
    pub fn from_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        check_dim("gram matrix", entries.nrows(), entries.ncols())?;
        let mut entries = entries;
        let n = entries.nrows();
        for j in 0..n {
            for i in j + 1..n {
                entries[(i, j)] = entries[(j, i)];
            }
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * factor,
        }
    }

    pub fn max_diagonal(&self) -> f64 {
        self.entries.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `G v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let out = &self.entries * DVector::from_column_slice(v);
        out.iter().copied().collect()
    }

    /// `t^T G t`, which equals `|A t|^2`.
    pub fn quadratic_form(&self, t: &[f64]) -> f64 {
        let gt = self.apply(t);
        t.iter().zip(&gt).map(|(a, b)| a * b).sum()
    }
}

/// `G = A^T A`, with `G_ij = <A e_i, A e_j>` computed once per unordered pair.
pub fn gram(a: &EmbeddingMatrix) -> GramMatrix {
    let n = a.n();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let ci = a.column(i);
        for j in i..n {
            let v: f64 = ci.iter().zip(a.column(j)).map(|(x, y)| x * y).sum();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramMatrix { entries: g }
}

/// One matrix row per line, comma separated, no header, shortest round-trip decimals.
pub fn write_matrix_csv<W: Write>(matrix: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in matrix.row_iter() {
        w.write_record(row.iter().map(|x| format!("{x}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let rows = read_rows_csv(reader)?;
    let ncols = rows.first().map_or(0, Vec::len);
    let nrows = rows.len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Rows of reals; all rows must have equal length.
pub fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: `{f}`: {e}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            check_dim("csv row length", first.len(), row.len())?;
        }
        rows.push(row);
    }
    Ok(rows)
}
