//! Sparse overlap statistics of a Gram matrix: `O_{I,l}`, its selector
//! average, sparse operator norms `M_{I,l}`, and the inequalities relating them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{selector_mean, GramMatrix, SelectorMode};
use crate::error::{Error, Result};
use crate::linalg::{block_sigma, block_singular, dot, norm, principal_top};
use crate::rng::{derive_seed, substream};
use crate::subset::{binomial, for_each_combination, IndexSet};
use crate::vector_models::RandomVectorModel;

pub const DEFAULT_EXHAUSTIVE_LIMIT: u128 = 1_000_000;

fn abs_desc(y: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a
}

/// `(sum_{k = lo+1}^{hi} y*_k^2)^{1/2}` for the nonincreasing rearrangement `y*` of `|y|`.
pub fn rearrangement_slice(y: &[f64], lo: usize, hi: usize) -> f64 {
    let a = abs_desc(y);
    let hi = hi.min(a.len());
    if lo >= hi {
        return 0.0;
    }
    a[lo..hi].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest `<x, y>` over unit `x` with at most `ell` non-zeros.
pub fn rearrangement_norm(y: &[f64], ell: usize) -> f64 {
    rearrangement_slice(y, 0, ell)
}

/// The complementary part: everything below the top `ell`.
pub fn rearrangement_tail(y: &[f64], ell: usize) -> f64 {
    rearrangement_slice(y, ell, y.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Greedy,
    LocalSearch,
    RandomRestart,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Greedy => "greedy",
            Strategy::LocalSearch => "local_search",
            Strategy::RandomRestart => "random_restart",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Strategy::Exhaustive,
            Strategy::Greedy,
            Strategy::LocalSearch,
            Strategy::RandomRestart,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown search strategy `{s}`")))
    }
}

/// Support search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub strategy: Strategy,
    /// Upper limit on support combinations an exhaustive search may visit.
    pub exhaustive_limit: u128,
    pub restarts: usize,
    /// Block evaluations allowed in one 1-swap pass.
    pub swap_budget: usize,
    pub seed: u64,
    /// Use exhaustive search whenever it fits in the limit.
    pub exact_when_affordable: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::RandomRestart,
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            restarts: 50,
            swap_budget: 20_000,
            seed: 0,
            exact_when_affordable: false,
        }
    }
}

impl SearchOptions {
    pub fn exhaustive() -> Self {
        Self {
            strategy: Strategy::Exhaustive,
            ..Self::default()
        }
    }

    pub fn heuristic(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_limit(mut self, limit: u128) -> Self {
        self.exhaustive_limit = limit;
        self
    }

    pub fn exact_when_affordable(mut self) -> Self {
        self.exact_when_affordable = true;
        self
    }

    fn reseeded(&self, label: &str, index: u64) -> Self {
        Self {
            seed: derive_seed(self.seed, label, index),
            ..*self
        }
    }
}

/// Supports `S1 ⊂ I`, `S2 ⊂ I^c` and unit weights attaining the statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCertificate {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn dense(n: usize, support: &[usize], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&i, &v) in support.iter().zip(w) {
        out[i] = v;
    }
    out
}

impl OverlapCertificate {
    fn empty() -> Self {
        Self {
            s1: Vec::new(),
            s2: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    /// `"1;3|0;2"` for `S1 = {1, 3}`, `S2 = {0, 2}`.
    pub fn supports_string(&self) -> String {
        format!("{}|{}", join(&self.s1), join(&self.s2))
    }

    pub fn dense_x(&self, n: usize) -> Vec<f64> {
        dense(n, &self.s1, &self.x)
    }

    pub fn dense_y(&self, n: usize) -> Vec<f64> {
        dense(n, &self.s2, &self.y)
    }

    /// `<G x, y> = <Ax, Ay>`
    pub fn value_in(&self, g: &GramMatrix) -> f64 {
        let e = g.entries();
        self.s1
            .iter()
            .zip(&self.x)
            .map(|(&i, xi)| {
                xi * self
                    .s2
                    .iter()
                    .zip(&self.y)
                    .map(|(&j, yj)| e[(i, j)] * yj)
                    .sum::<f64>()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseOverlapStat {
    pub value: f64,
    pub index_set: IndexSet,
    pub ell: usize,
    pub strategy: Strategy,
    pub certificate: OverlapCertificate,
    pub is_exact: bool,
}

/// Candidate pair of supports with its block norm.
#[derive(Debug, Clone)]
struct Pair {
    sigma: f64,
    s1: Vec<usize>,
    s2: Vec<usize>,
}

impl Pair {
    fn eval(g: &DMatrix<f64>, mut s1: Vec<usize>, mut s2: Vec<usize>) -> Self {
        s1.sort_unstable();
        s2.sort_unstable();
        Self {
            sigma: block_sigma(g, &s1, &s2),
            s1,
            s2,
        }
    }

    fn better(self, other: Self) -> Self {
        if other.sigma > self.sigma {
            other
        } else {
            self
        }
    }
}

fn exhaustive_count(rows: usize, k1: usize, cols: usize, k2: usize) -> u128 {
    binomial(rows, k1).saturating_mul(binomial(cols, k2))
}

/// Exhaustive maximum of `sigma(G[S1, S2])` over `|S1| = k1`, `|S2| = k2`.
/// Block norms are monotone under inclusion, so smaller supports are skipped.
fn exhaustive_pair(
    g: &DMatrix<f64>,
    rows: &[usize],
    cols: &[usize],
    k1: usize,
    k2: usize,
    limit: u128,
) -> Result<Pair> {
    let required = exhaustive_count(rows.len(), k1, cols.len(), k2);
    if required > limit {
        return Err(Error::Budget { required, limit });
    }
    let mut outer = Vec::new();
    for_each_combination(rows, k1, |s| outer.push(s.to_vec()));
    let best_for = |s1: &Vec<usize>| {
        let mut best: Option<Pair> = None;
        for_each_combination(cols, k2, |s2| {
            let sigma = block_sigma(g, s1, s2);
            if best.as_ref().is_none_or(|b| sigma > b.sigma) {
                best = Some(Pair {
                    sigma,
                    s1: s1.clone(),
                    s2: s2.to_vec(),
                });
            }
        });
        best.expect("k2 <= |cols|")
    };
    let partial: Vec<Pair> = if required > 4096 {
        outer.par_iter().map(best_for).collect()
    } else {
        outer.iter().map(best_for).collect()
    };
    Ok(partial
        .into_iter()
        .reduce(Pair::better)
        .expect("k1 <= |rows|"))
}

/// Indices of the `k` largest `|scores|`, ties to the lower index, returned sorted.
fn top_k(candidates: &[usize], scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .abs()
            .total_cmp(&scores[a].abs())
            .then(candidates[a].cmp(&candidates[b]))
    });
    let mut out: Vec<usize> = order[..k.min(order.len())]
        .iter()
        .map(|&p| candidates[p])
        .collect();
    out.sort_unstable();
    out
}

/// `(sum_{b} G[i, s_b] w_b)` for each `i` in `targets`.
fn partial_products(g: &DMatrix<f64>, targets: &[usize], s: &[usize], w: &[f64]) -> Vec<f64> {
    targets
        .iter()
        .map(|&i| s.iter().zip(w).map(|(&j, wj)| g[(i, j)] * wj).sum())
        .collect()
}

struct Search<'a> {
    g: &'a DMatrix<f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    k1: usize,
    k2: usize,
    swap_budget: usize,
}

impl Search<'_> {
    fn without(&self, all: &[usize], s: &[usize]) -> Vec<usize> {
        all.iter().copied().filter(|i| !s.contains(i)).collect()
    }

    /// Grows supports from a seed pair, adding the coordinate whose column
    /// (row) correlates best with the current singular vectors.
    fn grow(&self, i0: usize, j0: usize) -> Pair {
        let mut s1 = vec![i0];
        let mut s2 = vec![j0];
        while s1.len() < self.k1 || s2.len() < self.k2 {
            let bs = block_singular(self.g, &s1, &s2);
            if s1.len() < self.k1 {
                let cand = self.without(&self.rows, &s1);
                let scores = partial_products(self.g, &cand, &s2, &bs.right);
                s1.push(top_k(&cand, &scores, 1)[0]);
            }
            if s2.len() < self.k2 {
                let cand = self.without(&self.cols, &s2);
                let scores = partial_products(self.g, &cand, &s1, &bs.left);
                s2.push(top_k(&cand, &scores, 1)[0]);
            }
            s1.sort_unstable();
            s2.sort_unstable();
        }
        Pair::eval(self.g, s1, s2)
    }

    /// Alternating truncated best responses until the supports stop moving.
    fn refine(&self, start: Pair) -> Pair {
        let mut best = start;
        for _ in 0..100 {
            let bs = block_singular(self.g, &best.s1, &best.s2);
            let gy = partial_products(self.g, &self.rows, &best.s2, &bs.right);
            let s1 = top_k(&self.rows, &gy, self.k1);
            let x: Vec<f64> = s1
                .iter()
                .map(|i| gy[self.rows.binary_search(i).unwrap()])
                .collect();
            let gx = partial_products(self.g, &self.cols, &s1, &x);
            let s2 = top_k(&self.cols, &gx, self.k2);
            let next = Pair::eval(self.g, s1, s2);
            if next.sigma > best.sigma {
                best = next;
            } else {
                break;
            }
        }
        best
    }

    /// First-improvement 1-swap moves on either side, within the swap budget.
    fn swap(&self, start: Pair) -> Pair {
        let mut best = start;
        let mut evals = 0usize;
        'outer: loop {
            for side in 0..2 {
                let (current, all) = if side == 0 {
                    (&best.s1, &self.rows)
                } else {
                    (&best.s2, &self.cols)
                };
                let outside = self.without(all, current);
                for pos in 0..current.len() {
                    for &c in &outside {
                        evals += 1;
                        if evals > self.swap_budget {
                            break 'outer;
                        }
                        let mut s = current.clone();
                        s[pos] = c;
                        let cand = if side == 0 {
                            Pair::eval(self.g, s, best.s2.clone())
                        } else {
                            Pair::eval(self.g, best.s1.clone(), s)
                        };
                        if cand.sigma > best.sigma * (1.0 + 1e-12) {
                            best = cand;
                            continue 'outer;
                        }
                    }
                }
            }
            break;
        }
        best
    }

    fn argmax_entry(&self) -> (usize, usize) {
        let mut best = (self.rows[0], self.cols[0], f64::NEG_INFINITY);
        for &i in &self.rows {
            for &j in &self.cols {
                let v = self.g[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        (best.0, best.1)
    }

    fn local(&self, i0: usize, j0: usize) -> Pair {
        let grown = self.grow(i0, j0);
        let refined = self.refine(grown);
        let swapped = self.swap(refined);
        self.refine(swapped)
    }

    fn run(&self, strategy: Strategy, restarts: usize, seed: u64) -> Pair {
        let (i0, j0) = self.argmax_entry();
        match strategy {
            Strategy::Greedy => self.grow(i0, j0),
            Strategy::LocalSearch | Strategy::Exhaustive => self.local(i0, j0),
            Strategy::RandomRestart => (0..restarts.max(1) as u64)
                .into_par_iter()
                .map(|r| {
                    if r == 0 {
                        self.local(i0, j0)
                    } else {
                        let mut rng = substream(seed, "restart", r);
                        let i = self.rows[rng.random_range(0..self.rows.len())];
                        let j = self.cols[rng.random_range(0..self.cols.len())];
                        self.local(i, j)
                    }
                })
                .collect::<Vec<_>>()
                .into_iter()
                .reduce(Pair::better)
                .expect("at least one restart"),
        }
    }
}

/// `O_{I,l}`: the largest `|<Ax, Ay>|` over unit `x` on at most `l` coordinates
/// of `I` and unit `y` on at most `l` coordinates of `I^c`.
pub fn overlap_stat(
    g: &GramMatrix,
    index_set: &IndexSet,
    ell: usize,
    opts: &SearchOptions,
) -> Result<SparseOverlapStat> {
    overlap_stat_asymmetric(g, index_set, ell, ell, opts)
}

/// As [`overlap_stat`] with separate sparsity levels for `x` and `y`; the
/// reported `ell` is the larger one.
pub fn overlap_stat_asymmetric(
    g: &GramMatrix,
    index_set: &IndexSet,
    ell_x: usize,
    ell_y: usize,
    opts: &SearchOptions,
) -> Result<SparseOverlapStat> {
    index_set.check_ambient(g.n())?;
    if ell_x == 0 || ell_y == 0 {
        return Err(Error::Config("sparsity must be at least 1".into()));
    }
    let rows = index_set.indices();
    let cols = index_set.complement().indices();
    let ell = ell_x.max(ell_y);
    if rows.is_empty() || cols.is_empty() {
        return Ok(SparseOverlapStat {
            value: 0.0,
            index_set: index_set.clone(),
            ell,
            strategy: opts.strategy,
            certificate: OverlapCertificate::empty(),
            is_exact: true,
        });
    }
    let k1 = ell_x.min(rows.len());
    let k2 = ell_y.min(cols.len());
    let e = g.entries();
    let affordable = exhaustive_count(rows.len(), k1, cols.len(), k2) <= opts.exhaustive_limit;
    let (pair, strategy) =
        if opts.strategy == Strategy::Exhaustive || (opts.exact_when_affordable && affordable) {
            (
                exhaustive_pair(e, &rows, &cols, k1, k2, opts.exhaustive_limit)?,
                Strategy::Exhaustive,
            )
        } else {
            let search = Search {
                g: e,
                rows,
                cols,
                k1,
                k2,
                swap_budget: opts.swap_budget,
            };
            (search.run(opts.strategy, opts.restarts, opts.seed), opts.strategy)
        };
    let bs = block_singular(e, &pair.s1, &pair.s2);
    Ok(SparseOverlapStat {
        value: bs.sigma,
        index_set: index_set.clone(),
        ell,
        strategy,
        certificate: OverlapCertificate {
            s1: pair.s1,
            s2: pair.s2,
            x: bs.left,
            y: bs.right,
        },
        is_exact: strategy == Strategy::Exhaustive,
    })
}

/// `O_l = E_eta O_{I_eta, l}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorAverage {
    pub value: f64,
    pub mode: SelectorMode,
    pub std_error: f64,
    /// Every pattern was solved exhaustively.
    pub all_exact: bool,
}

pub fn selector_average(
    g: &GramMatrix,
    ell: usize,
    mode: SelectorMode,
    opts: &SearchOptions,
) -> Result<SelectorAverage> {
    let inexact = std::sync::atomic::AtomicBool::new(false);
    let mean = selector_mean(g.n(), mode, opts.seed, |set, k| {
        let stat = overlap_stat(g, set, ell, &opts.reseeded("pattern", k))?;
        if !stat.is_exact {
            inexact.store(true, std::sync::atomic::Ordering::Relaxed);
        }
        Ok(stat.value)
    })?;
    Ok(SelectorAverage {
        value: mean.value,
        mode,
        std_error: mean.std_error,
        all_exact: !inexact.into_inner(),
    })
}

/// `M_{I,l}`: the largest `|Ax|_2` over unit `x` on at most `l` coordinates of `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseNormStat {
    pub value: f64,
    pub index_set: IndexSet,
    pub ell: usize,
    pub strategy: Strategy,
    pub support: Vec<usize>,
    pub x: Vec<f64>,
    pub is_exact: bool,
}

impl SparseNormStat {
    /// `sqrt(x^T G x)` for the certificate.
    pub fn value_in(&self, g: &GramMatrix) -> f64 {
        g.quadratic_form(&dense(g.n(), &self.support, &self.x))
            .max(0.0)
            .sqrt()
    }
}

struct NormSearch<'a> {
    g: &'a DMatrix<f64>,
    rows: Vec<usize>,
    k: usize,
    swap_budget: usize,
}

impl NormSearch<'_> {
    fn eval(&self, mut s: Vec<usize>) -> (f64, Vec<usize>) {
        s.sort_unstable();
        (principal_top(self.g, &s).0, s)
    }

    fn grow(&self, i0: usize) -> (f64, Vec<usize>) {
        let mut s = vec![i0];
        while s.len() < self.k {
            let (_, v) = principal_top(self.g, &s);
            let cand: Vec<usize> = self.rows.iter().copied().filter(|i| !s.contains(i)).collect();
            let scores = partial_products(self.g, &cand, &s, &v);
            // ties in |(Gv)_i| are common at the first step; prefer larger diagonal
            let scores: Vec<f64> = scores
                .iter()
                .zip(&cand)
                .map(|(sc, &i)| sc.abs() + 1e-9 * self.g[(i, i)])
                .collect();
            s.push(top_k(&cand, &scores, 1)[0]);
        }
        self.eval(s)
    }

    fn refine(&self, mut best: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
        for _ in 0..100 {
            let (_, v) = principal_top(self.g, &best.1);
            let gv = partial_products(self.g, &self.rows, &best.1, &v);
            let next = self.eval(top_k(&self.rows, &gv, self.k));
            if next.0 > best.0 {
                best = next;
            } else {
                break;
            }
        }
        best
    }

    fn swap(&self, mut best: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
        let mut evals = 0;
        'outer: loop {
            let outside: Vec<usize> = self
                .rows
                .iter()
                .copied()
                .filter(|i| !best.1.contains(i))
                .collect();
            for pos in 0..best.1.len() {
                for &c in &outside {
                    evals += 1;
                    if evals > self.swap_budget {
                        break 'outer;
                    }
                    let mut s = best.1.clone();
                    s[pos] = c;
                    let cand = self.eval(s);
                    if cand.0 > best.0 * (1.0 + 1e-12) {
                        best = cand;
                        continue 'outer;
                    }
                }
            }
            break;
        }
        best
    }

    fn local(&self, i0: usize) -> (f64, Vec<usize>) {
        let r = self.refine(self.grow(i0));
        self.refine(self.swap(r))
    }
}

pub fn sparse_operator_norm(
    g: &GramMatrix,
    index_set: &IndexSet,
    ell: usize,
    opts: &SearchOptions,
) -> Result<SparseNormStat> {
    index_set.check_ambient(g.n())?;
    if ell == 0 {
        return Err(Error::Config("sparsity must be at least 1".into()));
    }
    let rows = index_set.indices();
    if rows.is_empty() {
        return Ok(SparseNormStat {
            value: 0.0,
            index_set: index_set.clone(),
            ell,
            strategy: opts.strategy,
            support: Vec::new(),
            x: Vec::new(),
            is_exact: true,
        });
    }
    let k = ell.min(rows.len());
    let e = g.entries();
    let required = binomial(rows.len(), k);
    let use_exhaustive = opts.strategy == Strategy::Exhaustive
        || (opts.exact_when_affordable && required <= opts.exhaustive_limit);
    let (support, strategy) = if use_exhaustive {
        if required > opts.exhaustive_limit {
            return Err(Error::Budget {
                required,
                limit: opts.exhaustive_limit,
            });
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        for_each_combination(&rows, k, |s| {
            let lam = principal_top(e, s).0;
            if best.as_ref().is_none_or(|b| lam > b.0) {
                best = Some((lam, s.to_vec()));
            }
        });
        (best.expect("k <= |I|").1, Strategy::Exhaustive)
    } else {
        let search = NormSearch {
            g: e,
            rows: rows.clone(),
            k,
            swap_budget: opts.swap_budget,
        };
        let start = *rows
            .iter()
            .max_by(|&&a, &&b| e[(a, a)].total_cmp(&e[(b, b)]).then(b.cmp(&a)))
            .expect("non-empty");
        let best = match opts.strategy {
            Strategy::Greedy => search.grow(start),
            // every coordinate of I seeds one descent; ties go to the earliest seed
            Strategy::LocalSearch | Strategy::Exhaustive => rows
                .par_iter()
                .map(|&i0| search.local(i0))
                .collect::<Vec<_>>()
                .into_iter()
                .reduce(|a, b| if b.0 > a.0 { b } else { a })
                .expect("non-empty"),
            Strategy::RandomRestart => (0..opts.restarts.max(1) as u64)
                .into_par_iter()
                .map(|r| {
                    if r == 0 {
                        search.local(start)
                    } else {
                        let mut rng = substream(opts.seed, "restart", r);
                        search.local(rows[rng.random_range(0..rows.len())])
                    }
                })
                .collect::<Vec<_>>()
                .into_iter()
                .reduce(|a, b| if b.0 > a.0 { b } else { a })
                .expect("at least one restart"),
        };
        (best.1, opts.strategy)
    };
    let (lam, x) = principal_top(e, &support);
    Ok(SparseNormStat {
        value: lam.max(0.0).sqrt(),
        index_set: index_set.clone(),
        ell,
        strategy,
        support,
        x,
        is_exact: strategy == Strategy::Exhaustive,
    })
}

/// `max{sqrt(2^s/m), 2^s/m} ln(en/2^s)^{2/alpha}`, with the log floored at 1.
pub fn assumption_bound_shape(two_s: usize, m: usize, n: usize, alpha: f64) -> f64 {
    let r = two_s as f64 / m as f64;
    let log = (std::f64::consts::E * n as f64 / two_s as f64).ln().max(1.0);
    r.sqrt().max(r) * log.powf(2.0 / alpha)
}

/// Dyadic scales `s` with `1 <= 2^s <= n`.
pub fn dyadic_scales(n: usize) -> Vec<u32> {
    (0..usize::BITS).take_while(|&s| 1usize << s <= n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub s: u32,
    pub two_s: usize,
    pub o_value: f64,
    pub std_error: f64,
    pub bound_shape: f64,
    pub ratio: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFit {
    pub c_a: f64,
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub per_scale: Vec<ScaleFit>,
}

/// Smallest `C_A` with `O_{2^s} <= C_A * shape(s)` at every dyadic scale.
pub fn fit_assumption_constant(
    g: &GramMatrix,
    alpha: f64,
    m: usize,
    mode: SelectorMode,
    opts: &SearchOptions,
) -> Result<AssumptionFit> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let n = g.n();
    let mut per_scale = Vec::new();
    for s in dyadic_scales(n) {
        let two_s = 1usize << s;
        let avg = selector_average(g, two_s, mode, &opts.reseeded("scale", s as u64))?;
        let shape = assumption_bound_shape(two_s, m, n, alpha);
        per_scale.push(ScaleFit {
            s,
            two_s,
            o_value: avg.value,
            std_error: avg.std_error,
            bound_shape: shape,
            ratio: avg.value / shape,
            exact: avg.all_exact,
        });
    }
    let c_a = per_scale.iter().map(|f| f.ratio).fold(0.0, f64::max);
    Ok(AssumptionFit {
        c_a,
        alpha,
        m,
        n,
        per_scale,
    })
}

/// One step `O_{I,2^r} <= O_{I,2^{r-1}} + E + F` of the dimension reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionScale {
    pub r: u32,
    pub o_current: f64,
    pub o_previous: f64,
    /// Largest overlap with `x` on `2^{r-1}` and `y` on `2^r` coordinates.
    pub o_mixed: f64,
    pub e_bar: f64,
    pub f_bar: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReductionReport {
    pub index_set: IndexSet,
    pub s: u32,
    pub scales: Vec<ReductionScale>,
    /// First scale whose exhaustive search did not fit the budget.
    pub truncated_at: Option<u32>,
    pub all_hold: bool,
}

fn slack(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

/// Checks the recursion at `r = 1..=s` with exact sparse spheres in place of nets.
///
/// `E` is the rank-`(2^{r-1}, 2^r]` block of `((Gy)_i)_{i in I}` maximized over
/// `y` on `2^r` coordinates of `I^c`; `F` is the same block of
/// `((Gx)_j)_{j in I^c}` over `x` on `2^{r-1}` coordinates of `I`. Both maxima
/// are taken over candidate sets that contain the maximizers used in the
/// recursion, so the reported values are lower bounds that still close it.
pub fn dimension_reduction_check(
    g: &GramMatrix,
    index_set: &IndexSet,
    s: u32,
    exhaustive_limit: u128,
) -> Result<DimensionReductionReport> {
    index_set.check_ambient(g.n())?;
    let rows = index_set.indices();
    let cols = index_set.complement().indices();
    let e = g.entries();
    let opts = SearchOptions::exhaustive().with_limit(exhaustive_limit);
    let mut scales = Vec::new();
    let mut truncated_at = None;
    for r in 1..=s {
        let (hi, lo) = (1usize << r, 1usize << (r - 1));
        let step = (|| -> Result<ReductionScale> {
            let current = overlap_stat(g, index_set, hi, &opts)?;
            let previous = overlap_stat(g, index_set, lo, &opts)?;
            let mixed = overlap_stat_asymmetric(g, index_set, lo, hi, &opts)?;
            let (e_bar, f_bar) = if rows.is_empty() || cols.is_empty() {
                (0.0, 0.0)
            } else {
                let slice_rows = |y: &[f64], s2: &[usize]| {
                    let gy = partial_products(e, &rows, s2, y);
                    rearrangement_slice(&gy, lo, hi)
                };
                let slice_cols = |x: &[f64], s1: &[usize]| {
                    let gx = partial_products(e, &cols, s1, x);
                    rearrangement_slice(&gx, lo, hi)
                };
                let mut e_bar = slice_rows(&current.certificate.y, &current.certificate.s2);
                for_each_combination(&cols, hi.min(cols.len()), |s2| {
                    let bs = block_singular(e, &rows, s2);
                    e_bar = e_bar.max(slice_rows(&bs.right, s2));
                });
                let mut f_bar = slice_cols(&mixed.certificate.x, &mixed.certificate.s1);
                for_each_combination(&rows, lo.min(rows.len()), |s1| {
                    let bs = block_singular(e, s1, &cols);
                    f_bar = f_bar.max(slice_cols(&bs.left, s1));
                });
                (e_bar, f_bar)
            };
            let rhs = previous.value + e_bar + f_bar;
            Ok(ReductionScale {
                r,
                o_current: current.value,
                o_previous: previous.value,
                o_mixed: mixed.value,
                e_bar,
                f_bar,
                rhs,
                holds: current.value <= rhs + slack(rhs),
            })
        })();
        match step {
            Ok(sc) => scales.push(sc),
            Err(Error::Budget { .. }) => {
                truncated_at = Some(r);
                break;
            }
            Err(other) => return Err(other),
        }
    }
    let all_hold = scales.iter().all(|sc| sc.holds);
    Ok(DimensionReductionReport {
        index_set: index_set.clone(),
        s,
        scales,
        truncated_at,
        all_hold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfBoundScale {
    pub s: u32,
    pub two_s: usize,
    pub m_sq: f64,
    pub max_column_sq: f64,
    pub o_value: f64,
    pub rhs: f64,
    pub holds: bool,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfBoundingReport {
    /// `max_i | |Ae_i|^2 - 1 |` on this realization.
    pub delta_observed: f64,
    pub scales: Vec<SelfBoundScale>,
    pub all_hold: bool,
}

/// `M_{2^s}^2 <= max_i |Ae_i|^2 + 4 O_{2^s}` at every dyadic scale.
pub fn self_bounding_check(
    g: &GramMatrix,
    mode: SelectorMode,
    opts: &SearchOptions,
) -> Result<SelfBoundingReport> {
    let n = g.n();
    let max_col = g.max_diagonal();
    let delta_observed = (0..n)
        .map(|i| (g.get(i, i) - 1.0).abs())
        .fold(0.0, f64::max);
    let full = IndexSet::full(n);
    let mut scales = Vec::new();
    for s in dyadic_scales(n) {
        let two_s = 1usize << s;
        let scale_opts = opts.reseeded("scale", s as u64);
        let norm = sparse_operator_norm(g, &full, two_s, &scale_opts)?;
        let avg = selector_average(g, two_s, mode, &scale_opts)?;
        let m_sq = norm.value * norm.value;
        let rhs = max_col + 4.0 * avg.value;
        scales.push(SelfBoundScale {
            s,
            two_s,
            m_sq,
            max_column_sq: max_col,
            o_value: avg.value,
            rhs,
            holds: m_sq <= rhs + slack(rhs),
            exact: norm.is_exact && avg.all_exact,
        });
    }
    let all_hold = scales.iter().all(|sc| sc.holds);
    Ok(SelfBoundingReport {
        delta_observed,
        scales,
        all_hold,
    })
}

/// The `k`-th largest of `|values|` (`k >= 1`).
pub fn kth_largest_abs(values: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= values.len(), "rank out of range");
    abs_desc(values)[k - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTailConfig {
    /// Number of independent copies of each variable.
    pub n: usize,
    pub collection_size: usize,
    pub s: u32,
    pub alpha: f64,
    pub l_const: f64,
    pub r_const: f64,
    /// Threshold constant; defaults to `L R^{1/alpha}`.
    pub c3: Option<f64>,
    pub mc_trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub u: f64,
    pub threshold: f64,
    pub exceedances: usize,
    pub rate: f64,
    /// Union bound `min(1, |Z| exp(2^s ln(en/2^s) - p 2^s ln u))`, `p = R ln(en/2^s)`.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTailReport {
    pub c3: f64,
    pub max_l2: f64,
    pub trials: usize,
    pub points: Vec<TailPoint>,
    /// Exceedance rate is nonincreasing along the `u` grid.
    pub monotone: bool,
}

/// Frequency with which `max_Z Z*_{2^s}` exceeds `c3 u ln(en/2^s)^{1/alpha} max |Z|_2`,
/// where `Z = <X, x_k>` for fixed unit directions `x_k` and `n` independent draws of `X`.
/// All `u` values share the same draws.
pub fn order_statistic_tail_check(
    model: &RandomVectorModel,
    cfg: &OrderTailConfig,
    u_grid: &[f64],
) -> Result<OrderTailReport> {
    let two_s = 1usize << cfg.s;
    if two_s > cfg.n {
        return Err(Error::Config(format!("2^s = {two_s} exceeds n = {}", cfg.n)));
    }
    if let Some(&u) = u_grid.iter().find(|&&u| u.is_nan() || u < std::f64::consts::E) {
        return Err(Error::Domain(format!("u must be at least e, got {u}")));
    }
    if cfg.collection_size == 0 || cfg.mc_trials == 0 {
        return Err(Error::Config("collection and trial counts must be positive".into()));
    }
    let sampler = model.sampler()?;
    let dim = sampler.dim();
    let mut drng = model.stream("order_tail_directions", 0);
    let directions: Vec<Vec<f64>> = (0..cfg.collection_size)
        .map(|_| {
            let v: Vec<f64> = (0..dim)
                .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut drng))
                .collect();
            let r = norm(&v);
            v.into_iter().map(|x| x / r).collect()
        })
        .collect();
    // isotropy: |<X, x>|_{L2} = |x|_2 = 1
    let max_l2 = 1.0;
    let stats: Vec<f64> = (0..cfg.mc_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = model.stream("order_tail", t);
            let draws: Vec<Vec<f64>> = (0..cfg.n).map(|_| sampler.draw(&mut rng)).collect();
            directions
                .iter()
                .map(|x| {
                    let z: Vec<f64> = draws.iter().map(|d| dot(d, x)).collect();
                    kth_largest_abs(&z, two_s)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let c3 = cfg.c3.unwrap_or(cfg.l_const * cfg.r_const.powf(1.0 / cfg.alpha));
    let log = (std::f64::consts::E * cfg.n as f64 / two_s as f64).ln();
    let p = cfg.r_const * log;
    let points: Vec<TailPoint> = u_grid
        .iter()
        .map(|&u| {
            let threshold = c3 * u * log.powf(1.0 / cfg.alpha) * max_l2;
            let exceedances = stats.iter().filter(|&&z| z > threshold).count();
            let exponent = two_s as f64 * log - p * two_s as f64 * u.ln();
            TailPoint {
                u,
                threshold,
                exceedances,
                rate: exceedances as f64 / cfg.mc_trials as f64,
                predicted: (cfg.collection_size as f64 * exponent.exp()).min(1.0),
            }
        })
        .collect();
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.u.total_cmp(&b.u));
    let monotone = sorted.windows(2).all(|w| w[1].rate <= w[0].rate);
    Ok(OrderTailReport {
        c3,
        max_l2,
        trials: cfg.mc_trials,
        points,
        monotone,
    })
}

/// One row of the per-scale table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub s: u32,
    pub two_s: usize,
    pub strategy: Strategy,
    pub value: f64,
    pub is_exact: bool,
    pub certificate_supports: String,
    pub seed: u64,
}

impl ScaleRecord {
    pub fn from_stat(s: u32, stat: &SparseOverlapStat, seed: u64) -> Self {
        Self {
            s,
            two_s: 1usize << s,
            strategy: stat.strategy,
            value: stat.value,
            is_exact: stat.is_exact,
            certificate_supports: stat.certificate.supports_string(),
            seed,
        }
    }
}

pub fn write_scale_csv<W: Write>(records: &[ScaleRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
