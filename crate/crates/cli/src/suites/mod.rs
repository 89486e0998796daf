//! The acceptance suites, runnable through `embedlab verify <name>` and the
//! `acceptance` test target.

pub mod oracle;

use embedlab_core::decoupling::{chain_diagnostics, verify_bilinearity_telescope, verify_decoupling_identity};
use embedlab_core::distortion::{distortion_finite, distortion_sphere, evaluate_gaussian_bound, fit_constant};
use embedlab_core::embedding::{
    build_embedding, column_norm_deviation, gram, randomize_columns, EmbeddingMatrix, SelectorMode,
    SignVector,
};
use embedlab_core::rng::{derive_seed, substream};
use embedlab_core::set_geometry::{
    build_admissible_sequence, critical_dimension, diameter, estimate_mean_width, gaussian_cloud,
    scales_s0_s1, SetDescriptor,
};
use embedlab_core::sparse_overlap::{
    fit_assumption_constant, overlap_stat, rearrangement_norm, self_bounding_check, SearchOptions,
};
use embedlab_core::subset::IndexSet;
use embedlab_core::vector_models::{RandomVectorModel, VectorKind};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{Budgets, CheckName, ExperimentConfig, Format, MatrixSpec, ModelSpec, OutputSpec, SetSpec};
use crate::error::{CliError, Result};
use crate::report::{rows_to_bytes, Row, Status};
use crate::runner;

pub const DEFAULT_SEED: u64 = 20_240_611;

pub const SUITES: [&str; 12] = [
    "basis_identity",
    "singular_values_gaussian",
    "singular_values_logconcave",
    "decoupling_identity",
    "bilinearity_telescope",
    "rearrangement",
    "overlap_exactness",
    "assumption_fit_scaling",
    "gaussian_benchmark",
    "chain_decomposition",
    "self_bounding",
    "determinism",
];

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub rows: Vec<Row>,
}

impl SuiteOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {} ({}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary
        )
    }
}

/// Accepts a suite name, its number, or `criterion-<k>`.
pub fn resolve(name: &str) -> Result<usize> {
    let key = name.strip_prefix("criterion-").unwrap_or(name);
    if let Ok(k) = key.parse::<usize>() {
        if (1..=SUITES.len()).contains(&k) {
            return Ok(k);
        }
    }
    SUITES
        .iter()
        .position(|s| *s == key)
        .map(|i| i + 1)
        .ok_or_else(|| CliError::UnknownSuite(name.to_string()))
}

pub fn run_suite(id: usize, seed: u64) -> Result<SuiteOutcome> {
    let name = *SUITES
        .get(id.wrapping_sub(1))
        .ok_or_else(|| CliError::UnknownSuite(id.to_string()))?;
    let s = Suite { name, seed };
    let (rows, passed, summary) = match id {
        1 => s.basis_identity(),
        2 => s.singular_values(VectorKind::Gaussian, 50, 2000, 3.0),
        3 => s.singular_values(VectorKind::ProductExponential, 40, 1600, 5.0),
        4 => s.decoupling_identity(),
        5 => s.bilinearity_telescope(),
        6 => s.rearrangement(),
        7 => s.overlap_exactness(),
        8 => s.assumption_fit_scaling(),
        9 => s.gaussian_benchmark(),
        10 => s.chain_decomposition(),
        11 => s.self_bounding(),
        _ => s.determinism(),
    }?;
    Ok(SuiteOutcome {
        id,
        name,
        passed,
        summary,
        rows,
    })
}

fn count(rows: &[Row]) -> usize {
    rows.iter().filter(|r| r.status == Status::Pass).count()
}

fn instance(kind: VectorKind, m: usize, n: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let model = RandomVectorModel::new(kind, m, derive_seed(seed, "model", 0));
    Ok(build_embedding(&model, n, &mut substream(seed, "embedding", 0))?)
}

fn normal_vector(n: usize, seed: u64, label: &str) -> Vec<f64> {
    let mut rng = substream(seed, label, 0);
    (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
}

fn split(n: usize, seed: u64) -> IndexSet {
    let mut rng = substream(seed, "split", 0);
    let bits = rng.random_range(1..(1u64 << n) - 1);
    IndexSet::from_bits(n, bits)
}

type Outcome = Result<(Vec<Row>, bool, String)>;

struct Suite {
    name: &'static str,
    seed: u64,
}

impl Suite {
    fn seed(&self, k: u64) -> u64 {
        derive_seed(self.seed, self.name, k)
    }

    fn row(&self, k: u64, ok: bool) -> Row {
        Row::new(self.name, k, self.seed(k), Status::from_bool(ok))
    }

    fn par<F>(&self, count: u64, f: F) -> Result<Vec<Row>>
    where
        F: Fn(u64, u64) -> Result<Row> + Sync,
    {
        (0..count).into_par_iter().map(|k| f(k, self.seed(k))).collect()
    }

    fn basis_identity(&self) -> Outcome {
        let basis = SetDescriptor::standard_basis(64)?;
        let pts = basis.points().expect("finite").to_vec();
        let rows = self.par(50, |k, seed| {
            let kind = if k % 2 == 0 { VectorKind::Gaussian } else { VectorKind::ProductExponential };
            let a = instance(kind, 256, 64, seed)?;
            let lib = distortion_finite(&a, &pts)?.empirical;
            let dev = column_norm_deviation(&a);
            let reference = oracle::column_deviation(&a);
            let ok = (lib - dev).abs() <= 1e-12 && (dev - reference).abs() <= 1e-12;
            Ok(self.row(k, ok).sides(lib, dev).detail("kind", kind.name()).detail("oracle", reference))
        })?;
        let c = count(&rows);
        Ok((rows, c == 50, format!("{c}/50 instances within 1e-12")))
    }

    fn singular_values(&self, kind: VectorKind, n: usize, m: usize, slack: f64) -> Outcome {
        let eps = slack * (n as f64 / m as f64).sqrt();
        let rows = self.par(20, |k, seed| {
            let a = instance(kind, m, n, seed)?;
            let (_, pair) = distortion_sphere(&a)?;
            let (lo, hi) = oracle::extreme_singular_values(&a);
            let agree = (lo - pair.lambda_min).abs() <= 1e-9 && (hi - pair.lambda_max).abs() <= 1e-9;
            let ok = agree && pair.lambda_min >= 1.0 - eps && pair.lambda_max <= 1.0 + eps;
            Ok(self
                .row(k, ok)
                .sides((pair.lambda_max - 1.0).max(1.0 - pair.lambda_min), eps)
                .detail("lambda_min", pair.lambda_min)
                .detail("lambda_max", pair.lambda_max)
                .detail("svd_agrees", agree))
        })?;
        let c = count(&rows);
        Ok((rows, c >= 19, format!("{c}/20 seeds inside 1 ± {slack}·sqrt(n/m), need 19")))
    }

    fn decoupling_identity(&self) -> Outcome {
        let sizes = [2usize, 8, 12];
        let rows = self.par(90, |k, seed| {
            let n = sizes[(k / 30) as usize];
            let a = instance(VectorKind::Gaussian, n + 4, n, seed)?;
            let eps = SignVector::random(n, derive_seed(seed, "signs", 0));
            let u = normal_vector(n, seed, "u");
            let rep = verify_decoupling_identity(&gram(&a), &eps, &u, SelectorMode::ExactEnumeration, 0)?;
            let reference = oracle::four_expected_v(&a, &eps, &u);
            let tol = 1e-10 * (1.0 + rep.z.abs());
            let ok = rep.residual <= tol && (rep.z - reference).abs() <= tol;
            Ok(self.row(k, ok).sides(rep.residual, tol).detail("n", n).detail("z", rep.z).detail("oracle", reference))
        })?;
        let c = count(&rows);
        Ok((rows, c == 90, format!("{c}/90 instances with residual <= 1e-10(1+|Z|)")))
    }

    fn bilinearity_telescope(&self) -> Outcome {
        let rows = self.par(50, |k, seed| {
            let a = instance(VectorKind::Gaussian, 8, 10, seed)?;
            let g = gram(&a);
            let eps = SignVector::random(10, derive_seed(seed, "signs", 0));
            let pts = gaussian_cloud(10, 16, &mut substream(seed, "set", 0));
            let seq = build_admissible_sequence(&pts)?;
            let s1 = seq.stabilization_level();
            let mut residual = 0.0f64;
            let mut bound_ok = true;
            let mut worst = (0.0, 0.0);
            for t in 0..pts.len() {
                let rep = verify_bilinearity_telescope(&g, &eps, &seq, t, 0, s1)?;
                residual = rep.scales.iter().map(|s| s.max_residual).fold(residual, f64::max);
                bound_ok &= rep.bound_holds;
                if rep.z_s1.abs() - rep.bound > worst.0 - worst.1 {
                    worst = (rep.z_s1.abs(), rep.bound);
                }
            }
            let ok = residual <= 1e-12 && bound_ok;
            Ok(self.row(k, ok).sides(worst.0, worst.1).detail("max_residual", residual).detail("s1", s1))
        })?;
        let c = count(&rows);
        Ok((rows, c == 50, format!("{c}/50 instances with telescope residual <= 1e-12 and bound holding")))
    }

    fn rearrangement(&self) -> Outcome {
        let rows = self.par(1000, |k, seed| {
            let mut rng = substream(seed, "case", 0);
            let n = rng.random_range(1..=12usize);
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let bits = rng.random_range(1..(1u64 << n));
            let set = IndexSet::from_bits(n, bits).indices();
            let ell = rng.random_range(1..=n);
            let restricted: Vec<f64> = set.iter().map(|&i| y[i]).collect();
            let lib = rearrangement_norm(&restricted, ell);
            let reference = oracle::sparse_sphere_max(&y, &set, ell);
            Ok(self.row(k, (lib - reference).abs() <= 1e-12).sides(lib, reference).detail("n", n).detail("ell", ell))
        })?;
        let c = count(&rows);
        Ok((rows, c == 1000, format!("{c}/1000 cases within 1e-12")))
    }

    fn overlap_exactness(&self) -> Outcome {
        let rows = self.par(50, |k, seed| {
            let (n, m, ell) = (12, 8, 1 + (k % 3) as usize);
            let a = instance(VectorKind::Gaussian, m, n, seed)?;
            let g = gram(&a);
            let set = split(n, seed);
            let exact = overlap_stat(&g, &set, ell, &SearchOptions::exhaustive())?.value;
            let reference = oracle::overlap(&a, &set.indices(), &set.complement().indices(), ell);
            let opts = SearchOptions::default().with_restarts(50).with_seed(derive_seed(seed, "search", 0));
            let heuristic = overlap_stat(&g, &set, ell, &opts)?.value;
            let below = heuristic <= exact + 1e-12;
            let matches = (heuristic - exact).abs() <= 1e-9;
            let oracle_ok = (exact - reference).abs() <= 1e-9;
            Ok(self
                .row(k, below && matches && oracle_ok)
                .sides(heuristic, exact)
                .detail("ell", ell)
                .detail("below", below)
                .detail("matches", matches)
                .detail("oracle_ok", oracle_ok))
        })?;
        let flag = |key: &str| rows.iter().filter(|r| r.details.contains(&format!("{key}=true"))).count();
        let (below, matches, oracle_ok) = (flag("below"), flag("matches"), flag("oracle_ok") == 50);
        let passed = below == 50 && matches >= 45 && oracle_ok;
        Ok((
            rows,
            passed,
            format!("random_restart matched {matches}/50 (need 45), never above exhaustive in {below}/50, exhaustive = oracle: {oracle_ok}"),
        ))
    }

    fn assumption_fit_scaling(&self) -> Outcome {
        let ms = [256usize, 1024];
        let rows = self.par(40, |k, seed| {
            let m = ms[(k / 20) as usize];
            let g = gram(&instance(VectorKind::Gaussian, m, 64, seed)?);
            let opts = SearchOptions::default()
                .with_restarts(4)
                .with_limit(10_000)
                .with_seed(derive_seed(seed, "search", 0));
            let fit = fit_assumption_constant(&g, 2.0, m, SelectorMode::MonteCarlo { samples: 8 }, &opts)?;
            Ok(Row::new(self.name, k, seed, Status::Info).empirical(fit.c_a).detail("m", m))
        })?;
        let median = |m: usize| {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.details == format!("m={m}"))
                .filter_map(|r| r.empirical)
                .collect();
            v.sort_by(f64::total_cmp);
            (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
        };
        let (a, b) = (median(256), median(1024));
        let ratio = a.max(b) / a.min(b);
        Ok((rows, ratio <= 2.0, format!("median C_A {a:.4} (m=256) vs {b:.4} (m=1024), ratio {ratio:.3}, need <= 2")))
    }

    fn gaussian_benchmark(&self) -> Outcome {
        let (n, m, u) = (64usize, 512usize, 3.0);
        let one = |seed: u64| -> Result<(f64, f64)> {
            let a = instance(VectorKind::Gaussian, m, n, seed)?;
            let pts = gaussian_cloud(n, 32, &mut substream(seed, "set", 0));
            let t = SetDescriptor::finite_cloud(pts.clone())?;
            let w = estimate_mean_width(&t, 4000, &mut substream(seed, "width", 0))?;
            let unit = evaluate_gaussian_bound(diameter(&t), w.value, critical_dimension(&t, &w)?, m, n, u, 1.0);
            Ok((distortion_finite(&a, &pts)?.empirical, unit.value))
        };
        // calibration family on its own label, disjoint from the trial seeds
        let calib: Vec<(f64, f64)> = (0..50u64)
            .into_par_iter()
            .map(|k| one(derive_seed(self.seed, "gaussian_benchmark_fit", k)))
            .collect::<Result<_>>()?;
        let (emp, unit): (Vec<f64>, Vec<f64>) = calib.into_iter().unzip();
        let c1 = fit_constant(&emp, &unit, 0.99)?;
        let rows = self.par(200, |k, seed| {
            let (e, b) = one(seed)?;
            Ok(self.row(k, e <= c1 * b).sides(e, c1 * b).detail("c1", c1))
        })?;
        let c = count(&rows);
        Ok((rows, c >= 190, format!("{c}/200 trials below the bound with fitted c1 = {c1:.4}, need 190")))
    }

    fn chain_decomposition(&self) -> Outcome {
        let rows = self.par(50, |k, seed| {
            let (n, m) = (32, 128);
            let a = instance(VectorKind::Gaussian, m, n, seed)?;
            let a_eps = randomize_columns(&a, &SignVector::random(n, derive_seed(seed, "signs", 0)))?;
            let pts = gaussian_cloud(n, 64, &mut substream(seed, "set", 0));
            let t = SetDescriptor::finite_cloud(pts.clone())?;
            let w = estimate_mean_width(&t, 2000, &mut substream(seed, "width", 0))?;
            let seq = build_admissible_sequence(&pts)?;
            let stop = seq.stabilization_level();
            let (s0, s1) = scales_s0_s1(critical_dimension(&t, &w)?, m);
            let s1 = (s1 as usize).min(stop);
            let s0 = (s0 as usize).min(s1);
            // every cut level, so the chained part is exercised too
            let mut ok = true;
            for cut in 0..=stop {
                let d = chain_diagnostics(&a_eps, &seq, s0.min(cut), cut)?;
                ok &= d.holds && d.tail_holds;
            }
            let d = chain_diagnostics(&a_eps, &seq, s0, s1)?;
            Ok(self
                .row(k, ok)
                .sides(d.lhs, d.rhs)
                .detail("s0", s0)
                .detail("s1", s1)
                .detail("phi", d.phi)
                .detail("psi_sq", d.psi_sq)
                .detail("tail_term", d.tail_term))
        })?;
        let c = count(&rows);
        Ok((rows, c == 50, format!("{c}/50 instances satisfy the decomposition at every cut level")))
    }

    fn self_bounding(&self) -> Outcome {
        let rows = self.par(30, |k, seed| {
            let g = gram(&instance(VectorKind::Gaussian, 6, 8, seed)?);
            let rep = self_bounding_check(&g, SelectorMode::ExactEnumeration, &SearchOptions::exhaustive())?;
            let worst = rep
                .scales
                .iter()
                .map(|s| (s.m_sq, s.rhs))
                .max_by(|a, b| (a.0 / a.1).total_cmp(&(b.0 / b.1)))
                .unwrap_or((0.0, 0.0));
            Ok(self.row(k, rep.all_hold).sides(worst.0, worst.1).detail("scales", rep.scales.len()))
        })?;
        let c = count(&rows);
        Ok((rows, c == 30, format!("{c}/30 instances hold at every scale")))
    }

    fn determinism(&self) -> Outcome {
        let cfg = ExperimentConfig {
            master_seed: self.seed,
            trials: 4,
            checks: vec![
                CheckName::DecouplingIdentity,
                CheckName::SingularValues,
                CheckName::ChainDiagnostics,
                CheckName::SelfBounding,
                CheckName::OverlapFit,
            ],
            model: ModelSpec {
                kind: VectorKind::Gaussian,
                dim: None,
                dof: None,
            },
            set: SetSpec::GaussianCloud { size: 16 },
            matrix: MatrixSpec { n: 8, m: 24 },
            budgets: Budgets::default(),
            constants: Default::default(),
            output: OutputSpec::default(),
        };
        let run = |jobs| -> Result<Vec<u8>> { rows_to_bytes(&runner::run_config(&cfg, jobs)?.rows, Format::Csv) };
        let first = run(None)?;
        let second = run(None)?;
        let single = run(Some(1))?;
        let suite = |id| -> Result<Vec<u8>> { rows_to_bytes(&run_suite(id, self.seed)?.rows, Format::Csv) };
        let rows = vec![
            self.row(0, first == second).detail("compare", "run_vs_rerun").detail("bytes", first.len()),
            self.row(1, first == single).detail("compare", "run_vs_single_worker").detail("bytes", single.len()),
            self.row(2, suite(4)? == suite(4)?).detail("compare", "decoupling_identity_suite"),
            self.row(3, suite(7)? == suite(7)?).detail("compare", "overlap_exactness_suite"),
        ];
        let c = count(&rows);
        Ok((rows, c == 4, format!("{c}/4 reruns byte-identical")))
    }
}
