//! The chaos `Z_u`, its decoupled pieces `W_{I,u}` and `V_{I,u,v}`, and the
//! chaining diagnostics built from them.
//!
//! With `G = A^T A` and signs `eps`:
//! `Z_u = sum_{i != j} G_ij eps_i eps_j u_i u_j`,
//! `W_{I,u} = G (sum_{i in I} eps_i u_i e_i)`,
//! `V_{I,u,v} = sum_{i in I} eps_i u_i (W_{I^c,v})_i`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{selector_mean, EmbeddingMatrix, GramMatrix, SelectorMode, SignVector};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::rng::substream;
use crate::set_geometry::AdmissibleSequence;
use crate::subset::IndexSet;

fn check_chaos(g: &GramMatrix, eps: &SignVector, u: &[f64]) -> Result<()> {
    check_dim("sign vector", g.n(), eps.len())?;
    check_dim("chaos vector", g.n(), u.len())
}

/// `G` applied to the sign-masked restriction of `u` to `I`.
pub fn compute_w(g: &GramMatrix, eps: &SignVector, set: &IndexSet, u: &[f64]) -> Result<Vec<f64>> {
    check_chaos(g, eps, u)?;
    set.check_ambient(g.n())?;
    let masked: Vec<f64> = (0..g.n())
        .map(|i| if set.contains(i) { eps.get(i) * u[i] } else { 0.0 })
        .collect();
    Ok(g.apply(&masked))
}

pub fn compute_v(
    g: &GramMatrix,
    eps: &SignVector,
    set: &IndexSet,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    check_chaos(g, eps, u)?;
    let w = compute_w(g, eps, &set.complement(), v)?;
    Ok((0..g.n())
        .filter(|&i| set.contains(i))
        .map(|i| eps.get(i) * u[i] * w[i])
        .sum())
}

/// The off-diagonal chaos `Z_u`.
pub fn compute_z(g: &GramMatrix, eps: &SignVector, u: &[f64]) -> Result<f64> {
    check_chaos(g, eps, u)?;
    let n = g.n();
    let su: Vec<f64> = (0..n).map(|i| eps.get(i) * u[i]).collect();
    let e = g.entries();
    Ok((0..n)
        .map(|i| {
            su[i]
                * (0..n)
                    .filter(|&j| j != i)
                    .map(|j| e[(i, j)] * su[j])
                    .sum::<f64>()
        })
        .sum())
}

/// `sum_i |Ae_i|^2 u_i^2`
pub fn diagonal_term(g: &GramMatrix, u: &[f64]) -> f64 {
    u.iter().enumerate().map(|(i, x)| g.get(i, i) * x * x).sum()
}

/// `E_eta V_{I_eta, u, v}` (or with `I_eta^c` when `complement` is set).
pub fn expected_v(
    g: &GramMatrix,
    eps: &SignVector,
    u: &[f64],
    v: &[f64],
    complement: bool,
    mode: SelectorMode,
    seed: u64,
) -> Result<(f64, f64)> {
    let mean = selector_mean(g.n(), mode, seed, |set, _| {
        if complement {
            compute_v(g, eps, &set.complement(), u, v)
        } else {
            compute_v(g, eps, set, u, v)
        }
    })?;
    Ok((mean.value, mean.std_error))
}

fn abs_expected_v(
    g: &GramMatrix,
    eps: &SignVector,
    u: &[f64],
    v: &[f64],
    complement: bool,
    mode: SelectorMode,
    seed: u64,
) -> Result<f64> {
    Ok(selector_mean(g.n(), mode, seed, |set, _| {
        let set = if complement { set.complement() } else { set.clone() };
        Ok(compute_v(g, eps, &set, u, v)?.abs())
    })?
    .value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub z: f64,
    pub four_expected_v: f64,
    pub residual: f64,
    pub mode: SelectorMode,
    /// Standard error of `4 E_eta V` (zero under exact enumeration).
    pub std_error: f64,
    pub tolerance: f64,
    pub holds: bool,
}

pub const DECOUPLING_TOLERANCE: f64 = 1e-10;

/// Checks `Z_u = 4 E_eta V_{I_eta,u,u}`. Under Monte Carlo the tolerance
/// widens by three standard errors.
pub fn verify_decoupling_identity(
    g: &GramMatrix,
    eps: &SignVector,
    u: &[f64],
    mode: SelectorMode,
    seed: u64,
) -> Result<DecouplingReport> {
    let z = compute_z(g, eps, u)?;
    let (ev, se) = expected_v(g, eps, u, u, false, mode, seed)?;
    let four_expected_v = 4.0 * ev;
    let std_error = 4.0 * se;
    let residual = (z - four_expected_v).abs();
    let tolerance = DECOUPLING_TOLERANCE * (1.0 + z.abs()) + 3.0 * std_error;
    Ok(DecouplingReport {
        z,
        four_expected_v,
        residual,
        mode,
        std_error,
        tolerance,
        holds: residual <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelescopeScale {
    pub s: usize,
    /// Largest residual of the four-term identity over all selector patterns.
    pub max_residual: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopeReport {
    pub t: usize,
    pub s0: usize,
    pub s1: usize,
    pub scales: Vec<TelescopeScale>,
    pub identity_holds: bool,
    pub z_s1: f64,
    pub z_s0: f64,
    /// `|Z_{pi_{s0} t}| + 4 sum_s E_eta(|V_{I^c,Delta,pi_{s+1}}| + |V_{I,Delta,pi_s}|)`
    pub bound: f64,
    pub bound_holds: bool,
}

pub const TELESCOPE_TOLERANCE: f64 = 1e-12;

/// Checks `V(pi_{s+1}, pi_{s+1}) = V(pi_{s+1}, Delta_s) + V(Delta_s, pi_s) + V(pi_s, pi_s)`
/// on every selector pattern for `s0 <= s < s1`, and the resulting bound on
/// `|Z_{pi_{s1} t}|`. Requires `n <= 16` (exact enumeration).
pub fn verify_bilinearity_telescope(
    g: &GramMatrix,
    eps: &SignVector,
    seq: &AdmissibleSequence,
    t: usize,
    s0: usize,
    s1: usize,
) -> Result<TelescopeReport> {
    if s0 > s1 {
        return Err(Error::Config(format!("need s0 <= s1, got {s0} > {s1}")));
    }
    if t >= seq.len() {
        return Err(Error::Config(format!("point index {t} out of range")));
    }
    let mode = SelectorMode::ExactEnumeration;
    let mut scales = Vec::new();
    let mut sum = 0.0;
    for s in s0..s1 {
        let next = seq.projection(s + 1, t);
        let cur = seq.projection(s, t);
        let delta = seq.increment(s, t);
        let n = g.n();
        let per_pattern: Vec<(f64, f64)> = (0..1u64 << n)
            .into_par_iter()
            .map(|bits| {
                let set = IndexSet::from_bits(n, bits);
                let lhs = compute_v(g, eps, &set, next, next)?;
                let terms = [
                    compute_v(g, eps, &set, next, &delta)?,
                    compute_v(g, eps, &set, &delta, cur)?,
                    compute_v(g, eps, &set, cur, cur)?,
                ];
                let scale = terms.iter().fold(lhs.abs(), |acc, x| acc.max(x.abs()));
                Ok(((lhs - terms.iter().sum::<f64>()).abs(), scale))
            })
            .collect::<Result<_>>()?;
        let max_residual = per_pattern.iter().map(|p| p.0).fold(0.0, f64::max);
        let scale = per_pattern.iter().map(|p| p.1).fold(0.0, f64::max);
        scales.push(TelescopeScale {
            s,
            max_residual,
            scale,
        });
        sum += abs_expected_v(g, eps, &delta, next, true, mode, 0)?
            + abs_expected_v(g, eps, &delta, cur, false, mode, 0)?;
    }
    let identity_holds = scales
        .iter()
        .all(|sc| sc.max_residual <= TELESCOPE_TOLERANCE * (1.0 + sc.scale));
    let z_s1 = compute_z(g, eps, seq.projection(s1, t))?;
    let z_s0 = compute_z(g, eps, seq.projection(s0, t))?;
    let bound = z_s0.abs() + 4.0 * sum;
    Ok(TelescopeReport {
        t,
        s0,
        s1,
        scales,
        identity_holds,
        z_s1,
        z_s0,
        bound,
        bound_holds: z_s1.abs() <= bound + TELESCOPE_TOLERANCE * (1.0 + bound),
    })
}

pub const BERNOULLI_MOMENTS: [u32; 4] = [2, 4, 8, 16];
pub const MIN_BERNOULLI_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliReport {
    pub p: u32,
    /// Monte Carlo `(E |sum_{i in I} eps_i a_i b_i|^p)^{1/p}`.
    pub lhs: f64,
    pub lhs_std_error: f64,
    /// `|a|_2 max_l |proj_{I_l} b|_2`
    pub rhs: f64,
    pub ratio: f64,
    /// Closed form of the left side when `p = 2`.
    pub exact_lhs: Option<f64>,
    pub blocks: Vec<Vec<usize>>,
    pub mc_samples: usize,
}

/// Partition of `I` into consecutive blocks of `p` indices by decreasing `|a_i|`
/// (ties to the lower index); the last block may be shorter.
pub fn moment_blocks(a: &[f64], set: &IndexSet, p: usize) -> Vec<Vec<usize>> {
    let mut idx = set.indices();
    idx.sort_by(|&i, &j| a[j].abs().total_cmp(&a[i].abs()).then(i.cmp(&j)));
    idx.chunks(p.max(1)).map(|c| c.to_vec()).collect()
}

pub fn bernoulli_moment_check(
    a: &[f64],
    b: &[f64],
    set: &IndexSet,
    p: u32,
    mc_samples: usize,
    seed: u64,
) -> Result<BernoulliReport> {
    check_dim("moment vectors", a.len(), b.len())?;
    set.check_ambient(a.len())?;
    if !BERNOULLI_MOMENTS.contains(&p) {
        return Err(Error::Config(format!("moment order must be one of 2, 4, 8, 16, got {p}")));
    }
    if mc_samples < MIN_BERNOULLI_SAMPLES {
        return Err(Error::Estimation(format!(
            "moment check needs at least {MIN_BERNOULLI_SAMPLES} sign draws, got {mc_samples}"
        )));
    }
    let idx = set.indices();
    let ab: Vec<f64> = idx.iter().map(|&i| a[i] * b[i]).collect();
    const CHUNK: usize = 4096;
    let chunks = mc_samples.div_ceil(CHUNK);
    let pf = p as i32;
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, "bernoulli", c as u64);
            let count = CHUNK.min(mc_samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let x: f64 = ab
                    .iter()
                    .map(|v| if rng.random::<bool>() { *v } else { -v })
                    .sum();
                let y = x.abs().powi(pf);
                s += y;
                s2 += y * y;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let k = mc_samples as f64;
    let mean = s / k;
    let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
    let lhs = mean.powf(1.0 / p as f64);
    // delta method for mean^{1/p}
    let lhs_std_error = if mean > 0.0 {
        (var / k).sqrt() * lhs / (p as f64 * mean)
    } else {
        0.0
    };
    let blocks = moment_blocks(a, set, p as usize);
    let max_proj = blocks
        .iter()
        .map(|blk| blk.iter().map(|&i| b[i] * b[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let rhs = norm(a) * max_proj;
    Ok(BernoulliReport {
        p,
        lhs,
        lhs_std_error,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        exact_lhs: (p == 2).then(|| norm_sq(&ab).sqrt()),
        blocks,
        mc_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// `sup_t sum_{s >= s1} |A_eps Delta_s t|_2`
    pub phi: f64,
    /// `sup_t | |A_eps pi_{s1} t|^2 - |pi_{s1} t|^2 |`
    pub psi_sq: f64,
    /// `sup_t | |pi_{s1} t|^2 - |t|^2 |`
    pub tail_term: f64,
    pub s0: usize,
    pub s1: usize,
    pub d_t: f64,
    /// `sup_t | |A_eps t|^2 - |t|^2 |`
    pub lhs: f64,
    /// `psi^2 + 2 phi sqrt(psi^2 + d_T^2) + phi^2 + tail_term`
    pub rhs: f64,
    pub holds: bool,
    /// `(sup_t sum_{s >= s1} |Delta_s t|)^2 + 2 d_T sup_t sum_{s >= s1} |Delta_s t|`
    pub tail_bound: f64,
    pub tail_holds: bool,
}

fn le(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * (1.0 + b.abs())
}

pub fn chain_diagnostics(
    a_eps: &EmbeddingMatrix,
    seq: &AdmissibleSequence,
    s0: usize,
    s1: usize,
) -> Result<ChainDiagnostics> {
    let pts = seq.points();
    check_dim("set ambient dimension", a_eps.n(), pts[0].len())?;
    let sq_dev = |v: &[f64]| -> Result<f64> {
        let av = a_eps.apply(v)?;
        Ok(norm_sq(&av) - norm_sq(v))
    };
    let stop = seq.stabilization_level();
    let mut phi = 0.0f64;
    let mut psi_sq = 0.0f64;
    let mut tail_term = 0.0f64;
    let mut lhs = 0.0f64;
    let mut tail_len = 0.0f64;
    let mut d_t = 0.0f64;
    for (t, p) in pts.iter().enumerate() {
        let mut phi_t = 0.0;
        for s in s1..stop {
            phi_t += norm(&a_eps.apply(&seq.increment(s, t))?);
        }
        phi = phi.max(phi_t);
        let pi = seq.projection(s1, t);
        psi_sq = psi_sq.max(sq_dev(pi)?.abs());
        tail_term = tail_term.max((norm_sq(pi) - norm_sq(p)).abs());
        lhs = lhs.max(sq_dev(p)?.abs());
        tail_len = tail_len.max(seq.tail_length(s1, t));
        d_t = d_t.max(norm(p));
    }
    let rhs = psi_sq + 2.0 * phi * (psi_sq + d_t * d_t).sqrt() + phi * phi + tail_term;
    let tail_bound = tail_len * tail_len + 2.0 * d_t * tail_len;
    Ok(ChainDiagnostics {
        phi,
        psi_sq,
        tail_term,
        s0,
        s1,
        d_t,
        lhs,
        rhs,
        holds: le(lhs, rhs),
        tail_bound,
        tail_holds: le(tail_term, tail_bound),
    })
}

/// Shapes `l*/sqrt(m) ln(en/k*)^{1/alpha}` and
/// `delta d_T^2 + (d_T l*/sqrt(m) + l*^2/m) ln(en/k*)^{2/alpha}` that `phi` and
/// `psi^2` are compared against (logs floored at 1).
pub fn chain_bound_shapes(
    d_t: f64,
    ell_star: f64,
    k_star: f64,
    m: usize,
    n: usize,
    delta: f64,
    alpha: f64,
) -> (f64, f64) {
    let log = (std::f64::consts::E * n as f64 / k_star).ln().max(1.0);
    let mf = m as f64;
    let phi = ell_star / mf.sqrt() * log.powf(1.0 / alpha);
    let psi = delta * d_t * d_t + (d_t * ell_star / mf.sqrt() + ell_star * ell_star / mf) * log.powf(2.0 / alpha);
    (phi, psi)
}
