//! One function per named check. Each trial draws everything it needs from
//! substreams of its own seed.

use std::f64::consts::E;

use embedlab_core::decoupling::{
    bernoulli_moment_check, chain_bound_shapes, chain_diagnostics, verify_bilinearity_telescope,
    verify_decoupling_identity, MIN_BERNOULLI_SAMPLES,
};
use embedlab_core::distortion::{
    distortion, distortion_finite, distortion_sphere, evaluate_gaussian_bound, evaluate_main_bound,
};
use embedlab_core::embedding::{
    build_embedding, column_norm_deviation, gram, randomize_columns, EmbeddingMatrix, GramMatrix,
    SelectorMode, SelectorVector, SignVector, EXACT_SELECTOR_MAX_N,
};
use embedlab_core::rng::{derive_seed, substream};
use embedlab_core::set_geometry::{
    build_admissible_sequence, critical_dimension, diameter, estimate_mean_width, gaussian_cloud,
    scales_s0_s1, SetDescriptor,
};
use embedlab_core::sparse_overlap::{
    dimension_reduction_check, fit_assumption_constant, order_statistic_tail_check,
    self_bounding_check, OrderTailConfig, SearchOptions,
};
use embedlab_core::subset::IndexSet;
use embedlab_core::vector_models::{
    estimate_suitability, estimate_thin_shell, RandomVectorModel, SuitabilityConfig, VectorKind,
};
use rand_distr::{Distribution, StandardNormal};

use crate::config::{CheckName, ExperimentConfig, SetSpec};
use crate::error::{CliError, Result};
use crate::report::{Row, Status};

pub fn trial_seed(cfg: &ExperimentConfig, check: CheckName, trial: u64) -> u64 {
    derive_seed(cfg.master_seed, check.name(), trial)
}

/// Runs one trial; failures become `error` rows so the run continues.
pub fn run_trial(cfg: &ExperimentConfig, check: CheckName, trial: u64) -> Row {
    let seed = trial_seed(cfg, check, trial);
    let ctx = Trial { cfg, check, trial, seed };
    ctx.run().unwrap_or_else(|e| Row::error(check.name(), trial, seed, e))
}

struct Trial<'a> {
    cfg: &'a ExperimentConfig,
    check: CheckName,
    trial: u64,
    seed: u64,
}

struct Geometry {
    d_t: f64,
    ell_star: f64,
    k_star: f64,
}

fn default_alpha(kind: VectorKind) -> f64 {
    match kind {
        VectorKind::ProductExponential | VectorKind::StudentTControl => 1.0,
        _ => 2.0,
    }
}

impl Trial<'_> {
    fn n(&self) -> usize {
        self.cfg.matrix.n
    }

    fn m(&self) -> usize {
        self.cfg.matrix.m
    }

    fn row(&self, status: Status) -> Row {
        Row::new(self.check.name(), self.trial, self.seed, status)
    }

    fn c(&self, name: &str, default: f64) -> f64 {
        self.cfg.constant(name, default)
    }

    fn alpha(&self) -> f64 {
        self.c("alpha", default_alpha(self.cfg.model.kind))
    }

    fn model(&self) -> RandomVectorModel {
        let model = RandomVectorModel::new(self.cfg.model.kind, self.m(), derive_seed(self.seed, "model", 0));
        match self.cfg.model.dof {
            Some(dof) => model.with_dof(dof),
            None => model,
        }
    }

    fn embedding(&self) -> Result<EmbeddingMatrix> {
        Ok(build_embedding(&self.model(), self.n(), &mut substream(self.seed, "embedding", 0))?)
    }

    fn signs(&self) -> SignVector {
        SignVector::random(self.n(), derive_seed(self.seed, "signs", 0))
    }

    fn gaussian_vector(&self, label: &str) -> Vec<f64> {
        let mut rng = substream(self.seed, label, 0);
        (0..self.n())
            .map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect()
    }

    fn selectors(&self) -> IndexSet {
        SelectorVector::random(self.n(), derive_seed(self.seed, "index_set", 0)).index_set()
    }

    fn descriptor(&self) -> Result<SetDescriptor> {
        let n = self.n();
        let mut rng = substream(self.seed, "set", 0);
        Ok(match &self.cfg.set {
            SetSpec::GaussianCloud { size } => SetDescriptor::finite_cloud(gaussian_cloud(n, *size, &mut rng))?,
            SetSpec::StandardBasis => SetDescriptor::standard_basis(n)?,
            SetSpec::UnitSphere => SetDescriptor::unit_sphere(n)?,
            SetSpec::SparseSphere { indices, ell } => {
                SetDescriptor::sparse_sphere(n, indices.clone().unwrap_or_else(|| (0..n).collect()), *ell)?
            }
            SetSpec::Ellipsoid { semi_axes } => SetDescriptor::ellipsoid(semi_axes.clone())?,
            SetSpec::FiniteCloud { points } => SetDescriptor::finite_cloud(points.clone())?,
            SetSpec::CsvCloud { path } => SetDescriptor::cloud_from_csv(std::fs::File::open(path)?)?,
            SetSpec::DifferenceSet { base_size } => {
                SetDescriptor::difference_set(gaussian_cloud(n, *base_size, &mut rng))?
            }
        })
    }

    fn points(&self) -> Result<Vec<Vec<f64>>> {
        let t = self.descriptor()?;
        t.points()
            .map(|p| p.to_vec())
            .ok_or_else(|| CliError::Invalid(format!("check `{}` needs a finite point set", self.check)))
    }

    fn geometry(&self, t: &SetDescriptor) -> Result<Geometry> {
        let width = estimate_mean_width(t, self.cfg.budgets.mc_samples.max(1000), &mut substream(self.seed, "width", 0))?;
        Ok(Geometry {
            d_t: diameter(t),
            ell_star: width.value,
            k_star: critical_dimension(t, &width)?,
        })
    }

    fn search(&self) -> SearchOptions {
        SearchOptions::default()
            .with_seed(derive_seed(self.seed, "search", 0))
            .with_restarts(self.cfg.budgets.restarts)
            .with_limit(self.cfg.budgets.exhaustive_limit as u128)
            .exact_when_affordable()
    }

    fn selector_mode(&self) -> SelectorMode {
        if self.n() <= EXACT_SELECTOR_MAX_N {
            SelectorMode::ExactEnumeration
        } else {
            SelectorMode::MonteCarlo {
                samples: self.cfg.budgets.selector_samples.max(2),
            }
        }
    }

    fn gram(&self) -> Result<GramMatrix> {
        Ok(gram(&self.embedding()?))
    }

    fn chain_scales(&self, g: &Geometry, stop: usize) -> (usize, usize) {
        let (s0, s1) = scales_s0_s1(g.k_star, self.m());
        let s1 = (s1 as usize).min(stop);
        ((s0 as usize).min(s1), s1)
    }

    fn run(&self) -> Result<Row> {
        match self.check {
            CheckName::ThinShell => self.thin_shell(),
            CheckName::Suitability => self.suitability(),
            CheckName::DistortionFinite => self.distortion_finite(),
            CheckName::DistortionSphere => self.distortion_sphere(),
            CheckName::SingularValues => self.singular_values(),
            CheckName::OverlapFit => self.overlap_fit(),
            CheckName::DecouplingIdentity => self.decoupling_identity(),
            CheckName::Bilinearity => self.bilinearity(),
            CheckName::BernoulliMoments => self.bernoulli_moments(),
            CheckName::ChainDiagnostics => self.chain(),
            CheckName::DimensionReduction => self.dimension_reduction(),
            CheckName::SelfBounding => self.self_bounding(),
            CheckName::OrderStatisticTail => self.order_tail(),
        }
    }

    fn thin_shell(&self) -> Result<Row> {
        let gamma = self.c("gamma", 0.05);
        let trials = self.c("thin_shell_trials", 200.0) as usize;
        let est = estimate_thin_shell(&self.model(), self.n(), trials, gamma)?;
        let delta = self.c("delta", 1.0);
        Ok(self
            .row(Status::from_bool(est.delta_hat <= delta))
            .sides(est.delta_hat, delta)
            .detail("gamma", gamma)
            .detail("band_lo", est.quantile_band.0)
            .detail("band_hi", est.quantile_band.1))
    }

    fn suitability(&self) -> Result<Row> {
        let mut sc = SuitabilityConfig::new(self.n(), self.alpha());
        sc.gamma = self.c("gamma", sc.gamma);
        sc.beta = self.c("beta", sc.beta);
        sc.mc_samples = self.cfg.budgets.mc_samples;
        let rep = estimate_suitability(&self.model(), &sc)?;
        Ok(self
            .row(Status::from_bool(!rep.delta_violation))
            .sides(rep.delta_hat, 1.0)
            .detail("l_hat", rep.l_hat)
            .detail("alpha", rep.alpha)
            .detail("r", rep.r)
            .detail("insufficient_samples", rep.moment_insufficient_samples))
    }

    fn distortion_finite(&self) -> Result<Row> {
        let t = self.descriptor()?;
        let pts = self.points()?;
        let a = self.embedding()?;
        let rep = distortion_finite(&a, &pts)?;
        self.bounded_distortion(&a, &t, rep.empirical)
    }

    fn bounded_distortion(&self, a: &EmbeddingMatrix, t: &SetDescriptor, empirical: f64) -> Result<Row> {
        let g = self.geometry(t)?;
        let delta = self.c("delta", column_norm_deviation(a));
        let (n, m) = (self.n(), self.m());
        let main = evaluate_main_bound(g.d_t, g.ell_star, g.k_star, m, n, delta, self.alpha(), self.c("c", 1.0));
        let gauss = evaluate_gaussian_bound(g.d_t, g.ell_star, g.k_star, m, n, self.c("u", 3.0), self.c("c1", 1.0));
        Ok(self
            .row(Status::from_bool(empirical <= main.value))
            .sides(empirical, main.value)
            .detail("d_t", g.d_t)
            .detail("ell_star", g.ell_star)
            .detail("k_star", g.k_star)
            .detail("delta", delta)
            .detail("gaussian_bound", gauss.value))
    }

    fn distortion_sphere(&self) -> Result<Row> {
        let t = match &self.cfg.set {
            SetSpec::UnitSphere | SetSpec::SparseSphere { .. } | SetSpec::Ellipsoid { .. } => self.descriptor()?,
            _ => SetDescriptor::unit_sphere(self.n())?,
        };
        let a = self.embedding()?;
        let rep = distortion(&a, &t, self.cfg.budgets.exhaustive_limit as u128)?;
        self.bounded_distortion(&a, &t, rep.empirical)
    }

    fn singular_values(&self) -> Result<Row> {
        let (_, pair) = distortion_sphere(&self.embedding()?)?;
        let slack = self.c("slack", 3.0) * (self.n() as f64 / self.m() as f64).sqrt();
        let dev = (pair.lambda_max - 1.0).max(1.0 - pair.lambda_min);
        Ok(self
            .row(Status::from_bool(dev <= slack))
            .sides(dev, slack)
            .detail("lambda_min", pair.lambda_min)
            .detail("lambda_max", pair.lambda_max))
    }

    fn overlap_fit(&self) -> Result<Row> {
        let fit = fit_assumption_constant(&self.gram()?, self.alpha(), self.m(), self.selector_mode(), &self.search())?;
        let per_scale = fit
            .per_scale
            .iter()
            .map(|f| format!("{}:{}", f.two_s, f.ratio))
            .collect::<Vec<_>>()
            .join("|");
        let row = match self.cfg.constants.get("c_a_max") {
            Some(&cap) => self.row(Status::from_bool(fit.c_a <= cap)).sides(fit.c_a, cap),
            None => self.row(Status::Info).empirical(fit.c_a),
        };
        Ok(row.detail("alpha", fit.alpha).detail("ratios", per_scale))
    }

    fn decoupling_identity(&self) -> Result<Row> {
        let mode = if self.n() <= EXACT_SELECTOR_MAX_N {
            SelectorMode::ExactEnumeration
        } else {
            SelectorMode::MonteCarlo {
                samples: self.cfg.budgets.mc_samples,
            }
        };
        let u = self.gaussian_vector("u");
        let rep = verify_decoupling_identity(&self.gram()?, &self.signs(), &u, mode, derive_seed(self.seed, "selectors", 0))?;
        Ok(self
            .row(Status::from_bool(rep.holds))
            .sides(rep.residual, rep.tolerance)
            .detail("z", rep.z)
            .detail("four_expected_v", rep.four_expected_v)
            .detail("std_error", rep.std_error))
    }

    fn bilinearity(&self) -> Result<Row> {
        let t = self.descriptor()?;
        let pts = self.points()?;
        let seq = build_admissible_sequence(&pts)?;
        let (s0, s1) = self.chain_scales(&self.geometry(&t)?, seq.stabilization_level());
        let (g, eps) = (self.gram()?, self.signs());
        let mut ok = true;
        let mut worst = (0.0, 0.0, f64::NEG_INFINITY);
        let mut max_residual = 0.0f64;
        for i in 0..pts.len() {
            let rep = verify_bilinearity_telescope(&g, &eps, &seq, i, s0, s1)?;
            ok &= rep.identity_holds && rep.bound_holds;
            max_residual = rep.scales.iter().map(|s| s.max_residual).fold(max_residual, f64::max);
            let ratio = if rep.bound > 0.0 { rep.z_s1.abs() / rep.bound } else { 0.0 };
            if ratio > worst.2 {
                worst = (rep.z_s1.abs(), rep.bound, ratio);
            }
        }
        Ok(self
            .row(Status::from_bool(ok))
            .sides(worst.0, worst.1)
            .detail("s0", s0)
            .detail("s1", s1)
            .detail("max_residual", max_residual))
    }

    fn bernoulli_moments(&self) -> Result<Row> {
        let p = self.c("p", 8.0) as u32;
        let a = self.gaussian_vector("bernoulli_a");
        let b = self.gaussian_vector("bernoulli_b");
        let samples = self.cfg.budgets.mc_samples.max(MIN_BERNOULLI_SAMPLES);
        let rep = bernoulli_moment_check(&a, &b, &self.selectors(), p, samples, derive_seed(self.seed, "bernoulli", 0))?;
        let cap = self.c("bernoulli_c", 10.0);
        Ok(self
            .row(Status::from_bool(rep.ratio <= cap))
            .sides(rep.lhs, rep.rhs)
            .detail("p", p)
            .detail("lhs_std_error", rep.lhs_std_error)
            .detail("constant", cap))
    }

    fn chain(&self) -> Result<Row> {
        let t = self.descriptor()?;
        let pts = self.points()?;
        let seq = build_admissible_sequence(&pts)?;
        let geo = self.geometry(&t)?;
        let (s0, s1) = self.chain_scales(&geo, seq.stabilization_level());
        let a_eps = randomize_columns(&self.embedding()?, &self.signs())?;
        let d = chain_diagnostics(&a_eps, &seq, s0, s1)?;
        let delta = self.c("delta", column_norm_deviation(&a_eps));
        let (phi_shape, psi_shape) =
            chain_bound_shapes(geo.d_t, geo.ell_star, geo.k_star, self.m(), self.n(), delta, self.alpha());
        Ok(self
            .row(Status::from_bool(d.holds && d.tail_holds))
            .sides(d.lhs, d.rhs)
            .detail("s0", s0)
            .detail("s1", s1)
            .detail("phi", d.phi)
            .detail("psi_sq", d.psi_sq)
            .detail("tail_term", d.tail_term)
            .detail("tail_bound", d.tail_bound)
            .detail("phi_shape", phi_shape)
            .detail("psi_shape", psi_shape))
    }

    fn dimension_reduction(&self) -> Result<Row> {
        let set = self.selectors();
        let small = set.len().min(self.n() - set.len());
        let s = match self.cfg.constants.get("s") {
            Some(&s) => s as u32,
            None if small == 0 => 0,
            None => small.ilog2(),
        };
        let rep = dimension_reduction_check(&self.gram()?, &set, s, self.cfg.budgets.exhaustive_limit as u128)?;
        let worst = rep
            .scales
            .iter()
            .max_by(|a, b| (a.o_current / a.rhs).total_cmp(&(b.o_current / b.rhs)))
            .map(|sc| (sc.o_current, sc.rhs))
            .unwrap_or((0.0, 0.0));
        // scales past the exhaustive budget are not checked, so the row cannot pass
        let status = match rep.truncated_at {
            Some(_) => Status::Error,
            None => Status::from_bool(rep.all_hold),
        };
        let mut row = self
            .row(status)
            .sides(worst.0, worst.1)
            .detail("s", s)
            .detail("index_set", set.indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "));
        if let Some(r) = rep.truncated_at {
            row = row
                .detail("error", format!("exhaustive budget {} exceeded at r={r}", self.cfg.budgets.exhaustive_limit));
        }
        Ok(row)
    }

    fn self_bounding(&self) -> Result<Row> {
        let rep = self_bounding_check(&self.gram()?, self.selector_mode(), &self.search())?;
        let worst = rep
            .scales
            .iter()
            .max_by(|a, b| (a.m_sq / a.rhs).total_cmp(&(b.m_sq / b.rhs)))
            .map(|sc| (sc.m_sq, sc.rhs))
            .unwrap_or((0.0, 0.0));
        Ok(self
            .row(Status::from_bool(rep.all_hold))
            .sides(worst.0, worst.1)
            .detail("delta_observed", rep.delta_observed))
    }

    fn order_tail(&self) -> Result<Row> {
        let beta = self.c("beta", 1.0);
        let cfg = OrderTailConfig {
            n: self.n(),
            collection_size: self.c("collection_size", 1.0) as usize,
            s: self.c("s", 0.0) as u32,
            alpha: self.alpha(),
            l_const: self.c("l", 1.0),
            r_const: self.c("r", 4.0 * beta + 2.0),
            c3: self.cfg.constants.get("c3").copied(),
            mc_trials: self.c("tail_trials", 1000.0) as usize,
        };
        let grid = [E, 2.0 * E, 4.0 * E];
        let rep = order_statistic_tail_check(&self.model(), &cfg, &grid)?;
        let trials = rep.trials as f64;
        let within = rep.points.iter().all(|p| {
            let slack = 3.0 * (p.predicted * (1.0 - p.predicted) / trials).sqrt() + 1.0 / trials;
            p.rate <= p.predicted + slack
        });
        let first = rep.points[0];
        let mut row = self
            .row(Status::from_bool(rep.monotone && within))
            .sides(first.rate, first.predicted)
            .detail("c3", rep.c3);
        for p in &rep.points {
            row = row.detail(&format!("rate@{:.3}", p.u), p.rate);
        }
        Ok(row)
    }
}
