//! Symmetric isotropic random vectors and estimates of their suitability
//! constants: the thin-shell deviation `delta` at confidence `1 - gamma`, and
//! the `L_p`–`L_2` equivalence constant `L` at growth exponent `alpha`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    Gaussian,
    RademacherCoords,
    ScaledSphere,
    /// Product of unit-variance symmetric Laplace coordinates (log-concave).
    ProductExponential,
    ProductUniform,
    /// Heavy-tailed Student-t coordinates; a negative control, not covered by
    /// the isotropy guarantees of the other kinds.
    StudentTControl,
}

impl VectorKind {
    pub const ALL: [VectorKind; 6] = [
        VectorKind::Gaussian,
        VectorKind::RademacherCoords,
        VectorKind::ScaledSphere,
        VectorKind::ProductExponential,
        VectorKind::ProductUniform,
        VectorKind::StudentTControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VectorKind::Gaussian => "gaussian",
            VectorKind::RademacherCoords => "rademacher_coords",
            VectorKind::ScaledSphere => "scaled_sphere",
            VectorKind::ProductExponential => "product_exponential",
            VectorKind::ProductUniform => "product_uniform",
            VectorKind::StudentTControl => "student_t_control",
        }
    }
}

impl fmt::Display for VectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unsupported vector kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVectorModel {
    pub kind: VectorKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
    pub seed: u64,
}

impl RandomVectorModel {
    pub fn new(kind: VectorKind, dim: usize, seed: u64) -> Self {
        Self {
            kind,
            dim,
            dof: None,
            seed,
        }
    }

    pub fn with_dof(mut self, dof: f64) -> Self {
        self.dof = Some(dof);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_isotropic(&self) -> bool {
        self.kind != VectorKind::StudentTControl
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler().map(|_| ())
    }

    /// Substream of this model's seed.
    pub fn stream(&self, label: &str, index: u64) -> Stream {
        substream(self.seed, label, index)
    }

    pub fn sampler(&self) -> Result<Sampler> {
        if self.dim == 0 {
            return Err(Error::Config("vector dimension must be at least 1".into()));
        }
        let inner = match self.kind {
            VectorKind::Gaussian => Inner::Gaussian,
            VectorKind::RademacherCoords => Inner::Rademacher,
            VectorKind::ScaledSphere => Inner::Sphere,
            VectorKind::ProductExponential => Inner::Laplace,
            VectorKind::ProductUniform => Inner::Uniform,
            VectorKind::StudentTControl => {
                let dof = self.dof.ok_or_else(|| {
                    Error::Config("student_t_control requires `dof`".into())
                })?;
                let dist = StudentT::new(dof).map_err(|e| {
                    Error::Config(format!("invalid degrees of freedom {dof}: {e}"))
                })?;
                if !(dof.is_finite() && dof > 0.0) {
                    return Err(Error::Config(format!("invalid degrees of freedom {dof}")));
                }
                // unit variance when it exists
                let scale = if dof > 2.0 {
                    ((dof - 2.0) / dof).sqrt()
                } else {
                    1.0
                };
                Inner::StudentT { dist, scale }
            }
        };
        Ok(Sampler {
            dim: self.dim,
            inner,
        })
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Gaussian,
    Rademacher,
    Sphere,
    Laplace,
    Uniform,
    StudentT { dist: StudentT<f64>, scale: f64 },
}

/// A validated model, ready to draw.
#[derive(Debug, Clone)]
pub struct Sampler {
    dim: usize,
    inner: Inner,
}

impl Sampler {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.inner {
            Inner::Gaussian => out.iter_mut().for_each(|x| *x = StandardNormal.sample(rng)),
            Inner::Rademacher => out
                .iter_mut()
                .for_each(|x| *x = if rng.random::<bool>() { 1.0 } else { -1.0 }),
            Inner::Sphere => {
                loop {
                    out.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
                    let r = norm(out);
                    if r > 0.0 {
                        let scale = (self.dim as f64).sqrt() / r;
                        out.iter_mut().for_each(|x| *x *= scale);
                        break;
                    }
                }
            }
            Inner::Laplace => out.iter_mut().for_each(|x| {
                let e: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *x = sign * e * std::f64::consts::FRAC_1_SQRT_2;
            }),
            Inner::Uniform => {
                let a = 3f64.sqrt();
                out.iter_mut().for_each(|x| *x = rng.random_range(-a..a));
            }
            Inner::StudentT { dist, scale } => {
                out.iter_mut().for_each(|x| *x = dist.sample(rng) * scale)
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.fill(rng, &mut v);
        v
    }
}

/// One draw of `X`.
pub fn sample_vector<R: Rng + ?Sized>(model: &RandomVectorModel, rng: &mut R) -> Result<Vec<f64>> {
    Ok(model.sampler()?.draw(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinShellEstimate {
    pub delta_hat: f64,
    pub gamma: f64,
    pub n_draws: usize,
    pub trials: usize,
    /// Order statistics bracketing the quantile at roughly 95% confidence.
    pub quantile_band: (f64, f64),
}

fn empirical_quantile_index(len: usize, level: f64) -> usize {
    let k = (level * len as f64).ceil() as usize;
    k.clamp(1, len) - 1
}

/// Empirical `(1 - gamma)`-quantile over `trials` of `max_i | |X_i|^2 / m - 1 |`
/// with `n_draws` independent draws per trial.
pub fn estimate_thin_shell(
    model: &RandomVectorModel,
    n_draws: usize,
    trials: usize,
    gamma: f64,
) -> Result<ThinShellEstimate> {
    if n_draws == 0 {
        return Err(Error::Estimation("n_draws must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Estimation(format!("gamma {gamma} is not in (0, 1)")));
    }
    if trials < 100 || (trials as f64) * gamma < 1.0 {
        return Err(Error::Estimation(format!(
            "{trials} trials cannot resolve the {gamma} tail quantile"
        )));
    }
    let sampler = model.sampler()?;
    let m = model.dim as f64;
    let mut maxima: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = model.stream("thin_shell", t as u64);
            let mut x = vec![0.0; model.dim];
            let mut worst: f64 = 0.0;
            for _ in 0..n_draws {
                sampler.fill(&mut rng, &mut x);
                worst = worst.max((dot(&x, &x) / m - 1.0).abs());
            }
            worst
        })
        .collect();
    maxima.sort_by(f64::total_cmp);
    let level = 1.0 - gamma;
    let idx = empirical_quantile_index(trials, level);
    let half = 2.0 * (trials as f64 * gamma * level).sqrt();
    let lo = empirical_quantile_index(trials, level - half / trials as f64);
    let hi = empirical_quantile_index(trials, (level + half / trials as f64).min(1.0));
    Ok(ThinShellEstimate {
        delta_hat: maxima[idx],
        gamma,
        n_draws,
        trials,
        quantile_band: (maxima[lo], maxima[hi]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "index")]
pub enum Direction {
    Basis(usize),
    Random(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionRatio {
    pub direction: Direction,
    pub p: f64,
    /// `|<X,x>|_p / (p^(1/alpha) |<X,x>|_2)`
    pub ratio: f64,
    /// Relative standard error of the empirical p-th moment.
    pub relative_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub l_hat: f64,
    pub alpha: f64,
    pub p_grid: Vec<f64>,
    pub mc_samples: usize,
    pub argmax: (Direction, f64),
    pub max_relative_std_error: f64,
    /// Set when the largest moment is too noisy to trust (relative error > 20%).
    pub insufficient_samples: bool,
    pub ratios: Vec<DirectionRatio>,
}

impl MomentReport {
    pub fn ratio(&self, direction: Direction, p: f64) -> Option<f64> {
        self.ratios
            .iter()
            .find(|r| r.direction == direction && r.p == p)
            .map(|r| r.ratio)
    }
}

const MOMENT_CHUNK: usize = 4096;
const MAX_MOMENT_RSE: f64 = 0.2;

/// Empirical `L = max_{x, p} |<X,x>|_p / (p^(1/alpha) |<X,x>|_2)` over all
/// standard basis directions plus `directions` uniformly random unit vectors.
pub fn estimate_moment_equivalence(
    model: &RandomVectorModel,
    alpha: f64,
    p_grid: &[f64],
    directions: usize,
    mc_samples: usize,
) -> Result<MomentReport> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("alpha {alpha} is not in (0, 2]")));
    }
    if p_grid.is_empty() || p_grid.iter().any(|&p| p.is_nan() || p < 2.0 || !p.is_finite()) {
        return Err(Error::Estimation("every moment order must satisfy p >= 2".into()));
    }
    if mc_samples < 2 {
        return Err(Error::Estimation("need at least two samples".into()));
    }
    let sampler = model.sampler()?;
    let m = model.dim;
    let mut dir_rng = model.stream("directions", 0);
    let random_dirs: Vec<Vec<f64>> = (0..directions)
        .map(|_| {
            let mut v = sampler_gaussian(&mut dir_rng, m);
            let r = norm(&v);
            v.iter_mut().for_each(|x| *x /= r);
            v
        })
        .collect();
    let n_dirs = m + directions;
    let np = p_grid.len();

    let chunks = mc_samples.div_ceil(MOMENT_CHUNK);
    let partials: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = model.stream("moments", c as u64);
            let count = MOMENT_CHUNK.min(mc_samples - c * MOMENT_CHUNK);
            let mut acc = Accum::new(n_dirs, np);
            let mut x = vec![0.0; m];
            let mut proj = vec![0.0; n_dirs];
            for _ in 0..count {
                sampler.fill(&mut rng, &mut x);
                proj[..m].copy_from_slice(&x);
                for (k, d) in random_dirs.iter().enumerate() {
                    proj[m + k] = dot(&x, d);
                }
                acc.add(&proj, p_grid);
            }
            acc
        })
        .collect();
    let mut total = Accum::new(n_dirs, np);
    for part in &partials {
        total.merge(part);
    }

    let n = mc_samples as f64;
    let mut ratios = Vec::with_capacity(n_dirs * np);
    let mut l_hat = f64::NEG_INFINITY;
    let mut argmax = (Direction::Basis(0), p_grid[0]);
    let mut max_rse: f64 = 0.0;
    for d in 0..n_dirs {
        let second = total.second[d] / n;
        let direction = if d < m {
            Direction::Basis(d)
        } else {
            Direction::Random(d - m)
        };
        for (k, &p) in p_grid.iter().enumerate() {
            let mp = total.pth[d * np + k] / n;
            let m2p = total.twice_pth[d * np + k] / n;
            let rse = if mp > 0.0 {
                ((m2p - mp * mp).max(0.0) / n).sqrt() / mp
            } else {
                0.0
            };
            let ratio = if second > 0.0 {
                mp.powf(1.0 / p) / (p.powf(1.0 / alpha) * second.sqrt())
            } else {
                0.0
            };
            max_rse = max_rse.max(rse);
            if ratio > l_hat {
                l_hat = ratio;
                argmax = (direction, p);
            }
            ratios.push(DirectionRatio {
                direction,
                p,
                ratio,
                relative_std_error: rse,
            });
        }
    }
    Ok(MomentReport {
        l_hat,
        alpha,
        p_grid: p_grid.to_vec(),
        mc_samples,
        argmax,
        max_relative_std_error: max_rse,
        insufficient_samples: max_rse > MAX_MOMENT_RSE,
        ratios,
    })
}

fn sampler_gaussian(rng: &mut Stream, m: usize) -> Vec<f64> {
    (0..m).map(|_| StandardNormal.sample(rng)).collect()
}

#[derive(Debug, Clone)]
struct Accum {
    np: usize,
    second: Vec<f64>,
    pth: Vec<f64>,
    twice_pth: Vec<f64>,
}

impl Accum {
    fn new(n_dirs: usize, np: usize) -> Self {
        Self {
            np,
            second: vec![0.0; n_dirs],
            pth: vec![0.0; n_dirs * np],
            twice_pth: vec![0.0; n_dirs * np],
        }
    }

    fn add(&mut self, proj: &[f64], p_grid: &[f64]) {
        for (d, &z) in proj.iter().enumerate() {
            let a = z.abs();
            self.second[d] += a * a;
            for (k, &p) in p_grid.iter().enumerate() {
                let ap = a.powf(p);
                self.pth[d * self.np + k] += ap;
                self.twice_pth[d * self.np + k] += ap * ap;
            }
        }
    }

    fn merge(&mut self, other: &Accum) {
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.second, &other.second);
        add(&mut self.pth, &other.pth);
        add(&mut self.twice_pth, &other.twice_pth);
    }
}

/// Default range constant `R = 4 beta + 2`.
pub fn default_r(beta: f64) -> f64 {
    4.0 * beta + 2.0
}

/// Powers of two in `[2, min(R log n, 16)]`; always contains 2.
pub fn default_p_grid(n: usize, r: f64) -> Vec<f64> {
    let top = (r * (n.max(2) as f64).ln()).min(16.0);
    let mut grid = vec![2.0];
    let mut p = 4.0;
    while p <= top {
        grid.push(p);
        p *= 2.0;
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityConfig {
    pub n_context: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub thin_shell_trials: usize,
    pub directions: usize,
    pub mc_samples: usize,
    pub p_grid: Option<Vec<f64>>,
}

impl SuitabilityConfig {
    pub fn new(n_context: usize, alpha: f64) -> Self {
        Self {
            n_context,
            gamma: 0.05,
            alpha,
            beta: 1.0,
            thin_shell_trials: 200,
            directions: 8,
            mc_samples: 20_000,
            p_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityReport {
    pub delta_hat: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub l_hat: f64,
    pub r: f64,
    pub p_grid: Vec<f64>,
    pub n_context: usize,
    pub samples_used: usize,
    /// `delta_hat` fell outside `[0, 1]`.
    pub delta_violation: bool,
    pub moment_insufficient_samples: bool,
    pub max_relative_std_error: f64,
    pub quantile_band: (f64, f64),
}

pub fn estimate_suitability(
    model: &RandomVectorModel,
    cfg: &SuitabilityConfig,
) -> Result<SuitabilityReport> {
    let r = default_r(cfg.beta);
    let p_grid = cfg
        .p_grid
        .clone()
        .unwrap_or_else(|| default_p_grid(cfg.n_context, r));
    let shell = estimate_thin_shell(model, cfg.n_context, cfg.thin_shell_trials, cfg.gamma)?;
    let moments =
        estimate_moment_equivalence(model, cfg.alpha, &p_grid, cfg.directions, cfg.mc_samples)?;
    Ok(SuitabilityReport {
        delta_hat: shell.delta_hat,
        gamma: cfg.gamma,
        alpha: cfg.alpha,
        l_hat: moments.l_hat,
        r,
        p_grid,
        n_context: cfg.n_context,
        samples_used: cfg.thin_shell_trials * cfg.n_context + cfg.mc_samples,
        delta_violation: !(0.0..=1.0).contains(&shell.delta_hat),
        moment_insufficient_samples: moments.insufficient_samples,
        max_relative_std_error: moments.max_relative_std_error,
        quantile_band: shell.quantile_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn scaled_sphere_has_exact_norm() {
        let model = RandomVectorModel::new(VectorKind::ScaledSphere, 4, 1);
        let mut rng = stream(3);
        for _ in 0..20 {
            let x = sample_vector(&model, &mut rng).unwrap();
            assert!((dot(&x, &x) - 4.0).abs() <= 4e-9);
        }
    }

    #[test]
    fn rademacher_support() {
        let model = RandomVectorModel::new(VectorKind::RademacherCoords, 3, 1);
        let mut rng = stream(4);
        for _ in 0..50 {
            let x = sample_vector(&model, &mut rng).unwrap();
            assert!(x.iter().all(|&v| v == 1.0 || v == -1.0));
        }
    }

    #[test]
    fn configuration_errors() {
        assert!(RandomVectorModel::new(VectorKind::Gaussian, 0, 1).validate().is_err());
        assert!(RandomVectorModel::new(VectorKind::StudentTControl, 3, 1)
            .validate()
            .is_err());
        assert!(RandomVectorModel::new(VectorKind::StudentTControl, 3, 1)
            .with_dof(-1.0)
            .validate()
            .is_err());
        assert!("cauchy".parse::<VectorKind>().is_err());
        assert_eq!(
            "product_exponential".parse::<VectorKind>().unwrap(),
            VectorKind::ProductExponential
        );
    }

    #[test]
    fn determinism() {
        let model = RandomVectorModel::new(VectorKind::ProductUniform, 5, 9);
        let a = sample_vector(&model, &mut model.stream("s", 0)).unwrap();
        let b = sample_vector(&model, &mut model.stream("s", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thin_shell_sphere_is_zero() {
        let model = RandomVectorModel::new(VectorKind::ScaledSphere, 50, 2);
        let est = estimate_thin_shell(&model, 20, 100, 0.05).unwrap();
        assert!(est.delta_hat <= 1e-9);
    }

    #[test]
    fn thin_shell_rejects_unresolvable_quantile() {
        let model = RandomVectorModel::new(VectorKind::Gaussian, 10, 2);
        assert!(matches!(
            estimate_thin_shell(&model, 5, 99, 0.05),
            Err(Error::Estimation(_))
        ));
        assert!(matches!(
            estimate_thin_shell(&model, 5, 200, 0.001),
            Err(Error::Estimation(_))
        ));
        assert!(estimate_thin_shell(&model, 0, 200, 0.1).is_err());
    }

    #[test]
    fn rademacher_basis_ratio_is_exact() {
        let model = RandomVectorModel::new(VectorKind::RademacherCoords, 3, 5);
        let rep = estimate_moment_equivalence(&model, 1.0, &[2.0, 4.0, 8.0], 2, 1000).unwrap();
        for p in [2.0f64, 4.0, 8.0] {
            let r = rep.ratio(Direction::Basis(0), p).unwrap();
            assert!((r - 1.0 / p).abs() < 1e-12, "p={p} r={r}");
        }
    }

    #[test]
    fn moment_orders_below_two_are_rejected() {
        let model = RandomVectorModel::new(VectorKind::Gaussian, 3, 5);
        assert!(estimate_moment_equivalence(&model, 2.0, &[1.5], 1, 100).is_err());
        assert!(estimate_moment_equivalence(&model, 2.5, &[2.0], 1, 100).is_err());
    }

    #[test]
    fn p_grid_defaults() {
        assert_eq!(default_r(1.0), 6.0);
        // 6 ln 64 = 24.95 -> capped at 16
        assert_eq!(default_p_grid(64, 6.0), vec![2.0, 4.0, 8.0, 16.0]);
        assert_eq!(default_p_grid(2, 2.0), vec![2.0]);
    }
}
