//! The distortion functional `sup_T | |At|^2 - |t|^2 |` and the upper bounds it
//! is compared against.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embedding::{gram, EmbeddingMatrix, GramMatrix};
use crate::error::{check_dim, Error, Result};
use crate::linalg::norm_sq;
use crate::set_geometry::SetDescriptor;
use crate::subset::{binomial, for_each_combination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    MainTheorem,
    GaussianBenchmark,
    LogConcaveCorollary,
}

impl BoundName {
    pub fn name(self) -> &'static str {
        match self {
            BoundName::MainTheorem => "main_theorem",
            BoundName::GaussianBenchmark => "gaussian_benchmark",
            BoundName::LogConcaveCorollary => "log_concave_corollary",
        }
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Geometric inputs shared by every bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d_t: f64,
    pub ell_star: f64,
    pub k_star: f64,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub name: BoundName,
    pub value: f64,
    pub constants_used: BTreeMap<String, f64>,
    pub inputs: BoundInputs,
}

impl BoundEvaluation {
    fn constant(&self, key: &str) -> Result<f64> {
        self.constants_used
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("{} is missing constant {key}", self.name)))
    }

    /// Re-evaluates the formula from the stored inputs and constants.
    pub fn recompute(&self) -> Result<f64> {
        let i = &self.inputs;
        let v = match self.name {
            BoundName::MainTheorem => {
                evaluate_main_bound(
                    i.d_t,
                    i.ell_star,
                    i.k_star,
                    i.m,
                    i.n,
                    self.constant("delta")?,
                    self.constant("alpha")?,
                    self.constant("c")?,
                )
                .value
            }
            BoundName::GaussianBenchmark => {
                evaluate_gaussian_bound(
                    i.d_t,
                    i.ell_star,
                    i.k_star,
                    i.m,
                    i.n,
                    self.constant("u")?,
                    self.constant("c1")?,
                )
                .value
            }
            BoundName::LogConcaveCorollary => {
                evaluate_logconcave_bound(
                    i.d_t,
                    i.ell_star,
                    i.k_star,
                    i.m,
                    i.n,
                    self.constant("gamma")?,
                    self.constant("beta")?,
                    self.constant("c")?,
                    self.constant("c_beta")?,
                )?
                .value
            }
        };
        Ok(v)
    }
}

/// `max{ln x, 1}`
pub fn floored_ln(x: f64) -> f64 {
    x.ln().max(1.0)
}

/// `(d_T l*/sqrt(m) + l*^2/m)`, the chaining part common to all bounds.
fn width_term(d_t: f64, ell_star: f64, m: usize) -> f64 {
    let m = m as f64;
    d_t * ell_star / m.sqrt() + ell_star * ell_star / m
}

fn constants(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `2 delta d_T^2 + c (d_T l*/sqrt(m) + l*^2/m) ln(en/k*)^{2/alpha}`
#[allow(clippy::too_many_arguments)]
pub fn evaluate_main_bound(
    d_t: f64,
    ell_star: f64,
    k_star: f64,
    m: usize,
    n: usize,
    delta: f64,
    alpha: f64,
    c: f64,
) -> BoundEvaluation {
    let log = floored_ln(std::f64::consts::E * n as f64 / k_star);
    let value = 2.0 * delta * d_t * d_t + c * width_term(d_t, ell_star, m) * log.powf(2.0 / alpha);
    BoundEvaluation {
        name: BoundName::MainTheorem,
        value,
        constants_used: constants(&[("alpha", alpha), ("c", c), ("delta", delta)]),
        inputs: BoundInputs {
            d_t,
            ell_star,
            k_star,
            m,
            n,
        },
    }
}

/// `c1 (u d_T l*/sqrt(m) + u^2 l*^2/m)`
pub fn evaluate_gaussian_bound(
    d_t: f64,
    ell_star: f64,
    k_star: f64,
    m: usize,
    n: usize,
    u: f64,
    c1: f64,
) -> BoundEvaluation {
    let mf = m as f64;
    let value = c1 * (u * d_t * ell_star / mf.sqrt() + u * u * ell_star * ell_star / mf);
    BoundEvaluation {
        name: BoundName::GaussianBenchmark,
        value,
        constants_used: constants(&[("c1", c1), ("u", u)]),
        inputs: BoundInputs {
            d_t,
            ell_star,
            k_star,
            m,
            n,
        },
    }
}

/// `sqrt(ln m ln ln m)`, defined for `m >= 3`.
pub fn theta_m(m: usize) -> Result<f64> {
    if m < 3 {
        return Err(Error::Domain(format!("theta_m needs m >= 3, got {m}")));
    }
    let l = (m as f64).ln();
    Ok((l * l.ln()).sqrt())
}

/// `c d_T^2 theta_m/sqrt(m) ln(en/gamma) + c_beta (d_T l*/sqrt(m) + l*^2/m) ln(en/k*)^2`
#[allow(clippy::too_many_arguments)]
pub fn evaluate_logconcave_bound(
    d_t: f64,
    ell_star: f64,
    k_star: f64,
    m: usize,
    n: usize,
    gamma: f64,
    beta: f64,
    c: f64,
    c_beta: f64,
) -> Result<BoundEvaluation> {
    let theta = theta_m(m)?;
    let e_n = std::f64::consts::E * n as f64;
    let value = c * d_t * d_t * theta / (m as f64).sqrt() * floored_ln(e_n / gamma)
        + c_beta * width_term(d_t, ell_star, m) * floored_ln(e_n / k_star).powi(2);
    Ok(BoundEvaluation {
        name: BoundName::LogConcaveCorollary,
        value,
        constants_used: constants(&[
            ("beta", beta),
            ("c", c),
            ("c_beta", c_beta),
            ("gamma", gamma),
            ("theta_m", theta),
        ]),
        inputs: BoundInputs {
            d_t,
            ell_star,
            k_star,
            m,
            n,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub empirical: f64,
    pub argmax_point: Vec<f64>,
    pub bounds: BTreeMap<BoundName, BoundEvaluation>,
    pub constants_used: BTreeMap<String, f64>,
    pub inputs: Option<BoundInputs>,
    pub seed: Option<u64>,
    pub trial_index: Option<u64>,
}

impl DistortionReport {
    fn new(empirical: f64, argmax_point: Vec<f64>) -> Self {
        Self {
            empirical,
            argmax_point,
            bounds: BTreeMap::new(),
            constants_used: BTreeMap::new(),
            inputs: None,
            seed: None,
            trial_index: None,
        }
    }

    pub fn with_trial(mut self, seed: u64, trial_index: u64) -> Self {
        self.seed = Some(seed);
        self.trial_index = Some(trial_index);
        self
    }

    /// Attaches a bound; its constants are merged into the report-level map
    /// under `<bound>.<constant>`.
    pub fn attach(&mut self, bound: BoundEvaluation) {
        for (k, v) in &bound.constants_used {
            self.constants_used.insert(format!("{}.{k}", bound.name), *v);
        }
        self.inputs = Some(bound.inputs);
        self.bounds.insert(bound.name, bound);
    }

    pub fn bound(&self, name: BoundName) -> Option<&BoundEvaluation> {
        self.bounds.get(&name)
    }
}

/// Exact maximization over a listed set of points. Ties go to the first point.
pub fn distortion_finite(a: &EmbeddingMatrix, points: &[Vec<f64>]) -> Result<DistortionReport> {
    if points.is_empty() {
        return Err(Error::Config("finite set must be non-empty".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, t) in points.iter().enumerate() {
        check_dim("set point", a.n(), t.len())?;
        let at = a.apply(t)?;
        let d = (norm_sq(&at) - norm_sq(t)).abs();
        if d > best.0 {
            best = (d, k);
        }
    }
    Ok(DistortionReport::new(best.0, points[best.1].clone()))
}

/// Extremal singular values of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPair {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

const EIGEN_RESIDUAL: f64 = 1e-7;

struct Spectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition with a residual check on every pair.
fn verified_eigen(h: &DMatrix<f64>) -> Result<Spectrum> {
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0).ok_or(Error::Numerical {
        residual: f64::NAN,
        message: "symmetric eigensolver did not converge".into(),
    })?;
    let scale = eig.eigenvalues.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let residual = (h * v - v * mu).norm();
        if residual.is_nan() || residual > EIGEN_RESIDUAL * scale {
            return Err(Error::Numerical {
                residual,
                message: format!("eigenpair {k} failed the residual check"),
            });
        }
    }
    Ok(Spectrum {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors: eig.eigenvectors,
    })
}

fn extreme_indices(values: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[lo] {
            lo = k;
        }
        if v > values[hi] {
            hi = k;
        }
    }
    (lo, hi)
}

/// Distortion over `S^{n-1}` through the spectrum of `A^T A`.
pub fn distortion_sphere(a: &EmbeddingMatrix) -> Result<(DistortionReport, SingularPair)> {
    let g = gram(a);
    let spec = verified_eigen(g.entries())?;
    let (lo, hi) = extreme_indices(&spec.values);
    let max_sq = spec.values[hi].max(0.0);
    let min_sq = if a.m() < a.n() {
        0.0
    } else {
        spec.values[lo].max(0.0)
    };
    let pair = SingularPair {
        lambda_min: min_sq.sqrt(),
        lambda_max: max_sq.sqrt(),
    };
    let (empirical, k) = if max_sq - 1.0 >= 1.0 - min_sq {
        (max_sq - 1.0, hi)
    } else {
        (1.0 - min_sq, lo)
    };
    let dir = spec.vectors.column(k).iter().copied().collect();
    Ok((DistortionReport::new(empirical.max(0.0), dir), pair))
}

/// Largest `|mu|` over the spectrum of a symmetric `h`, with its eigenvector.
fn spectral_abs_max(h: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let spec = verified_eigen(h)?;
    let (lo, hi) = extreme_indices(&spec.values);
    let k = if spec.values[hi].abs() >= spec.values[lo].abs() {
        hi
    } else {
        lo
    };
    Ok((
        spec.values[k].abs(),
        spec.vectors.column(k).iter().copied().collect(),
    ))
}

/// `G - I`
fn gram_deviation(g: &GramMatrix) -> DMatrix<f64> {
    let mut h = g.entries().clone();
    for i in 0..h.nrows() {
        h[(i, i)] -= 1.0;
    }
    h
}

/// Distortion over any set variant. Spheres and ellipsoids are solved
/// spectrally; sparse spheres enumerate supports within `exhaustive_limit`.
pub fn distortion(
    a: &EmbeddingMatrix,
    t: &SetDescriptor,
    exhaustive_limit: u128,
) -> Result<DistortionReport> {
    check_dim("set ambient dimension", a.n(), t.ambient_dim())?;
    match t {
        SetDescriptor::FiniteCloud { points } | SetDescriptor::DifferenceSet { points, .. } => {
            distortion_finite(a, points)
        }
        SetDescriptor::UnitSphere { .. } => Ok(distortion_sphere(a)?.0),
        SetDescriptor::Ellipsoid { semi_axes } => {
            let h = gram_deviation(&gram(a));
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(semi_axes));
            let (value, v) = spectral_abs_max(&(&d * h * &d))?;
            let x = v.iter().zip(semi_axes).map(|(y, s)| y * s).collect();
            Ok(DistortionReport::new(value, x))
        }
        SetDescriptor::SparseSphere { n, indices, ell } => {
            let k = (*ell).min(indices.len());
            if k == 0 {
                return Ok(DistortionReport::new(0.0, vec![0.0; *n]));
            }
            let required = binomial(indices.len(), k);
            if required > exhaustive_limit {
                return Err(Error::Budget {
                    required,
                    limit: exhaustive_limit,
                });
            }
            let h = gram_deviation(&gram(a));
            let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
            let mut failure = None;
            for_each_combination(indices, k, |s| {
                if failure.is_some() {
                    return;
                }
                let sub = h.select_rows(s).select_columns(s);
                match spectral_abs_max(&sub) {
                    Ok((v, w)) => {
                        if best.as_ref().is_none_or(|b| v > b.0) {
                            best = Some((v, s.to_vec(), w));
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            let (value, support, w) = best.expect("at least one support");
            let mut x = vec![0.0; *n];
            for (&i, wi) in support.iter().zip(w) {
                x[i] = wi;
            }
            Ok(DistortionReport::new(value, x))
        }
    }
}

/// Empirical `q`-quantile (nearest rank, `ceil(qN)`-th order statistic).
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(Error::Estimation("quantile needs data and q in [0, 1]".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Ok(v[idx])
}

/// Fits a multiplicative constant as the `q`-quantile of
/// `empirical / bound_with_unit_constant` over a calibration family.
pub fn fit_constant(empirical: &[f64], unit_bounds: &[f64], q: f64) -> Result<f64> {
    if empirical.len() != unit_bounds.len() {
        return Err(Error::Dimension {
            context: "calibration pairs",
            expected: empirical.len(),
            found: unit_bounds.len(),
        });
    }
    let ratios: Vec<f64> = empirical
        .iter()
        .zip(unit_bounds)
        .filter(|(_, b)| **b > 0.0)
        .map(|(e, b)| e / b)
        .collect();
    empirical_quantile(&ratios, q)
}
