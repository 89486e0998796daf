//! Test sets `T`, their Gaussian mean width `l*(T)`, diameter `d_T`,
//! critical dimension `k*(T) = (l*/d_T)^2`, and greedy admissible sequences.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::rng::substream;
use crate::sparse_overlap::rearrangement_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum SetDescriptor {
    FiniteCloud {
        points: Vec<Vec<f64>>,
    },
    UnitSphere {
        n: usize,
    },
    /// Unit vectors supported on at most `ell` coordinates of `indices`.
    SparseSphere {
        n: usize,
        indices: Vec<usize>,
        ell: usize,
    },
    /// The solid ellipsoid `{ x : sum x_i^2 / a_i^2 <= 1 }`.
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    /// `{ x - y : x, y in base }`, materialized in `points`.
    DifferenceSet {
        base: Vec<Vec<f64>>,
        points: Vec<Vec<f64>>,
    },
}

fn check_cloud(points: &[Vec<f64>]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::Config("finite cloud must be non-empty".into()))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::Config("points must have positive dimension".into()));
    }
    for p in points {
        crate::error::check_dim("cloud point", n, p.len())?;
    }
    Ok(n)
}

impl SetDescriptor {
    pub fn finite_cloud(points: Vec<Vec<f64>>) -> Result<Self> {
        check_cloud(&points)?;
        Ok(SetDescriptor::FiniteCloud { points })
    }

    pub fn unit_sphere(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("sphere dimension must be positive".into()));
        }
        Ok(SetDescriptor::UnitSphere { n })
    }

    pub fn sparse_sphere(n: usize, indices: Vec<usize>, ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::Config("sparsity must be at least 1".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Config(format!("index {bad} outside ambient dimension {n}")));
        }
        let mut indices = indices;
        indices.sort_unstable();
        indices.dedup();
        Ok(SetDescriptor::SparseSphere { n, indices, ell })
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        if semi_axes.is_empty() || semi_axes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("ellipsoid needs finite semi-axes".into()));
        }
        Ok(SetDescriptor::Ellipsoid { semi_axes })
    }

    pub fn difference_set(base: Vec<Vec<f64>>) -> Result<Self> {
        check_cloud(&base)?;
        let mut points = vec![vec![0.0; base[0].len()]];
        for (i, x) in base.iter().enumerate() {
            for (j, y) in base.iter().enumerate() {
                if i != j {
                    points.push(x.iter().zip(y).map(|(a, b)| a - b).collect());
                }
            }
        }
        Ok(SetDescriptor::DifferenceSet { base, points })
    }

    /// A finite cloud read from CSV, one point per row, no header.
    pub fn cloud_from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        Self::finite_cloud(crate::embedding::read_rows_csv(reader)?)
    }

    /// The standard basis `{e_1, .., e_n}`.
    pub fn standard_basis(n: usize) -> Result<Self> {
        Self::finite_cloud(
            (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect(),
        )
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            SetDescriptor::FiniteCloud { points } | SetDescriptor::DifferenceSet { points, .. } => {
                points[0].len()
            }
            SetDescriptor::UnitSphere { n } | SetDescriptor::SparseSphere { n, .. } => *n,
            SetDescriptor::Ellipsoid { semi_axes } => semi_axes.len(),
        }
    }

    /// Listed points for the finite variants.
    pub fn points(&self) -> Option<&[Vec<f64>]> {
        match self {
            SetDescriptor::FiniteCloud { points } | SetDescriptor::DifferenceSet { points, .. } => {
                Some(points)
            }
            _ => None,
        }
    }

    /// `lambda T` for the variants closed under scaling.
    pub fn scaled(&self, lambda: f64) -> Option<Self> {
        let scale = |pts: &[Vec<f64>]| -> Vec<Vec<f64>> {
            pts.iter()
                .map(|p| p.iter().map(|x| x * lambda).collect())
                .collect()
        };
        match self {
            SetDescriptor::FiniteCloud { points } => {
                Some(SetDescriptor::FiniteCloud { points: scale(points) })
            }
            SetDescriptor::DifferenceSet { base, points } => Some(SetDescriptor::DifferenceSet {
                base: scale(base),
                points: scale(points),
            }),
            SetDescriptor::Ellipsoid { semi_axes } => Some(SetDescriptor::Ellipsoid {
                semi_axes: semi_axes.iter().map(|a| a * lambda).collect(),
            }),
            _ => None,
        }
    }
}

/// `size` points with i.i.d. `N(0, 1/n)` coordinates, so norms concentrate near 1.
pub fn gaussian_cloud<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let s = 1.0 / (n as f64).sqrt();
    (0..size)
        .map(|_| {
            (0..n)
                .map(|_| s * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect()
        })
        .collect()
}

/// `d_T = sup_{t in T} |t|_2`
pub fn diameter(t: &SetDescriptor) -> f64 {
    match t {
        SetDescriptor::FiniteCloud { points } | SetDescriptor::DifferenceSet { points, .. } => {
            points.iter().map(|p| norm(p)).fold(0.0, f64::max)
        }
        SetDescriptor::UnitSphere { .. } => 1.0,
        SetDescriptor::SparseSphere { indices, .. } => {
            if indices.is_empty() {
                0.0
            } else {
                1.0
            }
        }
        SetDescriptor::Ellipsoid { semi_axes } => {
            semi_axes.iter().map(|a| a.abs()).fold(0.0, f64::max)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub value: f64,
    pub std_error: f64,
    pub mc_samples: usize,
    pub exact: bool,
}

impl WidthEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            mc_samples: 1,
            exact: true,
        }
    }
}

/// `E |G|_2` for a standard Gaussian in `R^n`.
pub fn gaussian_norm_mean(n: usize) -> f64 {
    let n = n as f64;
    std::f64::consts::SQRT_2 * (ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
}

const HALF_NORMAL_MEAN: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const WIDTH_CHUNK: usize = 1024;
pub const MIN_WIDTH_SAMPLES: usize = 1000;

/// If every point is a multiple of one vector `a`, returns `max |t|_2`.
fn collinear_radius(points: &[Vec<f64>]) -> Option<f64> {
    let a = points
        .iter()
        .max_by(|x, y| norm_sq(x).total_cmp(&norm_sq(y)))?;
    let aa = norm_sq(a);
    if aa == 0.0 {
        return Some(0.0);
    }
    let tol = 1e-12;
    points
        .iter()
        .all(|t| {
            let c = dot(t, a) / aa;
            let resid: f64 = t.iter().zip(a).map(|(x, y)| (x - c * y).powi(2)).sum();
            resid <= tol * tol * norm_sq(t)
        })
        .then(|| aa.sqrt())
}

/// `l*(T) = E sup_{t in T} |<G, t>|`.
///
/// Closed form for spheres and collinear clouds (which include single points);
/// Monte Carlo with reported standard error otherwise. The Gaussian draws are
/// taken from substreams of one seed drawn from `rng`, so reusing the stream
/// state reuses the draws.
pub fn estimate_mean_width<R: Rng + ?Sized>(
    t: &SetDescriptor,
    mc_samples: usize,
    rng: &mut R,
) -> Result<WidthEstimate> {
    let n = t.ambient_dim();
    match t {
        SetDescriptor::UnitSphere { n } => return Ok(WidthEstimate::exact(gaussian_norm_mean(*n))),
        SetDescriptor::SparseSphere { indices, ell, .. } if *ell >= indices.len() => {
            return Ok(WidthEstimate::exact(if indices.is_empty() {
                0.0
            } else {
                gaussian_norm_mean(indices.len())
            }));
        }
        SetDescriptor::FiniteCloud { points } | SetDescriptor::DifferenceSet { points, .. } => {
            if let Some(r) = collinear_radius(points) {
                return Ok(WidthEstimate::exact(HALF_NORMAL_MEAN * r));
            }
        }
        _ => {}
    }
    if mc_samples < MIN_WIDTH_SAMPLES {
        return Err(Error::Estimation(format!(
            "Monte Carlo width needs at least {MIN_WIDTH_SAMPLES} samples, got {mc_samples}"
        )));
    }
    let base: u64 = rng.random();
    let chunks = mc_samples.div_ceil(WIDTH_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = substream(base, "width", c as u64);
            let count = WIDTH_CHUNK.min(mc_samples - c * WIDTH_CHUNK);
            let mut g = vec![0.0; n];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                g.iter_mut().for_each(|x| *x = Distribution::<f64>::sample(&StandardNormal, &mut r));
                let v = support_value(t, &g);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums
        .iter()
        .fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
    let k = mc_samples as f64;
    let mean = s / k;
    let var = ((s2 - k * mean * mean) / (k - 1.0)).max(0.0);
    Ok(WidthEstimate {
        value: mean,
        std_error: (var / k).sqrt(),
        mc_samples,
        exact: false,
    })
}

/// `sup_{t in T} |<g, t>|`
fn support_value(t: &SetDescriptor, g: &[f64]) -> f64 {
    match t {
        SetDescriptor::FiniteCloud { points } | SetDescriptor::DifferenceSet { points, .. } => {
            points.iter().map(|p| dot(g, p).abs()).fold(0.0, f64::max)
        }
        SetDescriptor::UnitSphere { .. } => norm(g),
        SetDescriptor::SparseSphere { indices, ell, .. } => {
            let restricted: Vec<f64> = indices.iter().map(|&i| g[i]).collect();
            rearrangement_norm(&restricted, *ell)
        }
        SetDescriptor::Ellipsoid { semi_axes } => semi_axes
            .iter()
            .zip(g)
            .map(|(a, x)| (a * x).powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

/// `k*(T) = (l*(T) / d_T)^2`
pub fn critical_dimension(t: &SetDescriptor, width: &WidthEstimate) -> Result<f64> {
    let d = diameter(t);
    if d == 0.0 {
        return Err(Error::DegenerateSet("diameter is zero".into()));
    }
    Ok((width.value / d).powi(2))
}

/// `max{k*, ln n}`
pub fn lambda_star_value(k_star: f64, n: usize) -> f64 {
    k_star.max((n as f64).ln())
}

pub fn lambda_star(t: &SetDescriptor, width: &WidthEstimate, n: usize) -> Result<f64> {
    Ok(lambda_star_value(critical_dimension(t, width)?, n))
}

/// Smallest `s >= 0` with `2^s >= x`.
fn ceil_log2(x: f64) -> u32 {
    let mut s = 0u32;
    while ((1u64 << s) as f64) < x {
        s += 1;
    }
    s
}

/// Dyadic chaining scales: `2^{s0}` is `max{k*, 1}` rounded up to a power of
/// two, `2^{s1} = max{2^{s0}, m rounded up}`.
pub fn scales_s0_s1(k_star: f64, m: usize) -> (u32, u32) {
    let s0 = ceil_log2(k_star.max(1.0));
    let s1 = s0.max(ceil_log2(m.max(1) as f64));
    (s0, s1)
}

/// Cardinality bound of level `s`: 1 for `s = 0`, else `2^{2^s}`.
pub fn level_capacity(s: usize) -> usize {
    match s {
        0 => 1,
        s if s >= 6 => usize::MAX,
        s => 1usize << (1usize << s),
    }
}

/// Nested levels `T_0 ⊂ T_1 ⊂ ..` built by greedy farthest-point packing,
/// with nearest-point maps `pi_s` (ties to the lowest point index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSequence {
    points: Vec<Vec<f64>>,
    order: Vec<usize>,
    level_sizes: Vec<usize>,
    nearest: Vec<Vec<usize>>,
}

pub const MAX_SEQUENCE_POINTS: usize = 1 << 16;

pub fn build_admissible_sequence(points: &[Vec<f64>]) -> Result<AdmissibleSequence> {
    check_cloud(points)?;
    let size = points.len();
    if size > MAX_SEQUENCE_POINTS {
        return Err(Error::Config(format!(
            "admissible sequences support at most {MAX_SEQUENCE_POINTS} points"
        )));
    }
    let mut level_sizes = Vec::new();
    for s in 0.. {
        let sz = level_capacity(s).min(size);
        level_sizes.push(sz);
        if sz == size {
            break;
        }
    }

    let n = points[0].len();
    let centroid: Vec<f64> = (0..n)
        .map(|k| points.iter().map(|p| p[k]).sum::<f64>() / size as f64)
        .collect();
    let dist2 = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum() };
    let start = (0..size)
        .min_by(|&a, &b| {
            dist2(&points[a], &centroid)
                .total_cmp(&dist2(&points[b], &centroid))
                .then(a.cmp(&b))
        })
        .expect("non-empty");

    let mut order = Vec::with_capacity(size);
    let mut chosen = vec![false; size];
    let mut best = vec![f64::INFINITY; size];
    let mut near = vec![usize::MAX; size];
    let mut nearest = Vec::with_capacity(level_sizes.len());
    let mut next = start;
    let mut level = 0;
    while order.len() < size {
        let c = next;
        chosen[c] = true;
        order.push(c);
        for (t, p) in points.iter().enumerate() {
            let d = dist2(p, &points[c]);
            if d < best[t] || (d == best[t] && c < near[t]) {
                best[t] = d;
                near[t] = c;
            }
        }
        while level < level_sizes.len() && order.len() == level_sizes[level] {
            nearest.push(near.clone());
            level += 1;
        }
        // farthest remaining point, lowest index on ties
        let mut far = f64::NEG_INFINITY;
        for t in 0..size {
            if !chosen[t] && best[t] > far {
                far = best[t];
                next = t;
            }
        }
    }
    Ok(AdmissibleSequence {
        points: points.to_vec(),
        order,
        level_sizes,
        nearest,
    })
}

impl AdmissibleSequence {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First `s` with `T_s = T`; every `Delta_s` with `s >= stabilization_level()` vanishes.
    pub fn stabilization_level(&self) -> usize {
        self.level_sizes.len() - 1
    }

    pub fn level_size(&self, s: usize) -> usize {
        self.level_sizes[s.min(self.stabilization_level())]
    }

    /// Point indices of `T_s`.
    pub fn level(&self, s: usize) -> &[usize] {
        &self.order[..self.level_size(s)]
    }

    /// Index of `pi_s t` for the point with index `t`.
    pub fn projection_index(&self, s: usize, t: usize) -> usize {
        self.nearest[s.min(self.stabilization_level())][t]
    }

    pub fn projection(&self, s: usize, t: usize) -> &[f64] {
        &self.points[self.projection_index(s, t)]
    }

    /// `Delta_s t = pi_{s+1} t - pi_s t`
    pub fn increment(&self, s: usize, t: usize) -> Vec<f64> {
        self.projection(s + 1, t)
            .iter()
            .zip(self.projection(s, t))
            .map(|(a, b)| a - b)
            .collect()
    }

    /// `sum_{s >= from} |Delta_s t|_2`
    pub fn tail_length(&self, from: usize, t: usize) -> f64 {
        (from..self.stabilization_level())
            .map(|s| norm(&self.increment(s, t)))
            .sum()
    }

    pub fn sup_tail_length(&self, from: usize) -> f64 {
        (0..self.len())
            .map(|t| self.tail_length(from, t))
            .fold(0.0, f64::max)
    }

    /// `sup_t sum_s sqrt(2^s) |Delta_s t|_2`, an upper proxy for gamma_2.
    pub fn gamma2_proxy(&self) -> f64 {
        (0..self.len())
            .map(|t| {
                (0..self.stabilization_level())
                    .map(|s| 2f64.powi(s as i32).sqrt() * norm(&self.increment(s, t)))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Checks the cardinality bounds `|T_0| = 1`, `|T_s| <= 2^{2^s}`.
    pub fn is_admissible(&self) -> bool {
        self.level_sizes
            .iter()
            .enumerate()
            .all(|(s, &sz)| sz <= level_capacity(s))
            && self.level_sizes[0] == 1
    }
}
