use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use embedlab_core::vector_models::VectorKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    ThinShell,
    Suitability,
    DistortionFinite,
    DistortionSphere,
    SingularValues,
    OverlapFit,
    DecouplingIdentity,
    Bilinearity,
    BernoulliMoments,
    ChainDiagnostics,
    DimensionReduction,
    SelfBounding,
    OrderStatisticTail,
}

impl CheckName {
    pub const ALL: [CheckName; 13] = [
        CheckName::ThinShell,
        CheckName::Suitability,
        CheckName::DistortionFinite,
        CheckName::DistortionSphere,
        CheckName::SingularValues,
        CheckName::OverlapFit,
        CheckName::DecouplingIdentity,
        CheckName::Bilinearity,
        CheckName::BernoulliMoments,
        CheckName::ChainDiagnostics,
        CheckName::DimensionReduction,
        CheckName::SelfBounding,
        CheckName::OrderStatisticTail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckName::ThinShell => "thin_shell",
            CheckName::Suitability => "suitability",
            CheckName::DistortionFinite => "distortion_finite",
            CheckName::DistortionSphere => "distortion_sphere",
            CheckName::SingularValues => "singular_values",
            CheckName::OverlapFit => "overlap_fit",
            CheckName::DecouplingIdentity => "decoupling_identity",
            CheckName::Bilinearity => "bilinearity",
            CheckName::BernoulliMoments => "bernoulli_moments",
            CheckName::ChainDiagnostics => "chain_diagnostics",
            CheckName::DimensionReduction => "dimension_reduction",
            CheckName::SelfBounding => "self_bounding",
            CheckName::OrderStatisticTail => "order_statistic_tail",
        }
    }

    /// Checks that need a finite point set.
    pub fn needs_points(self) -> bool {
        matches!(
            self,
            CheckName::DistortionFinite | CheckName::Bilinearity | CheckName::ChainDiagnostics
        )
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Invalid(format!("unknown check `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: VectorKind,
    /// Must equal `matrix.m` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub n: usize,
    pub m: usize,
}

/// Point set used by the set-dependent checks. Random variants are redrawn
/// per trial from the trial seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant", deny_unknown_fields)]
pub enum SetSpec {
    GaussianCloud { size: usize },
    StandardBasis,
    UnitSphere,
    SparseSphere {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
        ell: usize,
    },
    Ellipsoid { semi_axes: Vec<f64> },
    FiniteCloud { points: Vec<Vec<f64>> },
    CsvCloud { path: PathBuf },
    /// `T - T` for a Gaussian base cloud of the given size.
    DifferenceSet { base_size: usize },
}

impl Default for SetSpec {
    fn default() -> Self {
        SetSpec::GaussianCloud { size: 32 }
    }
}

impl SetSpec {
    pub fn is_finite(&self) -> bool {
        !matches!(
            self,
            SetSpec::UnitSphere | SetSpec::SparseSphere { .. } | SetSpec::Ellipsoid { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub mc_samples: usize,
    pub exhaustive_limit: u64,
    pub restarts: usize,
    /// Selector draws per scale when `n` is too large to enumerate.
    pub selector_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            mc_samples: 10_000,
            exhaustive_limit: 1_000_000,
            restarts: 50,
            selector_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    pub model: ModelSpec,
    #[serde(default)]
    pub set: SetSpec,
    pub matrix: MatrixSpec,
    #[serde(default)]
    pub budgets: Budgets,
    /// Named constants (`c`, `u`, `c1`, `alpha`, ...); missing names fall back to defaults.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config {
            path: ".".into(),
            message: e.to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let MatrixSpec { n, m } = self.matrix;
        if n == 0 || m == 0 {
            return Err(CliError::Invalid("matrix dimensions must be positive".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Invalid("trials must be positive".into()));
        }
        if let Some(dim) = self.model.dim {
            if dim != m {
                return Err(CliError::Invalid(format!("model.dim = {dim} differs from matrix.m = {m}")));
            }
        }
        let ambient = match &self.set {
            SetSpec::Ellipsoid { semi_axes } => Some(semi_axes.len()),
            SetSpec::FiniteCloud { points } => points.first().map(|p| p.len()),
            _ => None,
        };
        if let Some(d) = ambient {
            if d != n {
                return Err(CliError::Invalid(format!("set dimension {d} differs from matrix.n = {n}")));
            }
        }
        if !self.set.is_finite() {
            if let Some(c) = self.checks.iter().find(|c| c.needs_points()) {
                return Err(CliError::Invalid(format!("check `{c}` needs a finite point set")));
            }
        }
        Ok(())
    }

    pub fn constant(&self, name: &str, default: f64) -> f64 {
        self.constants.get(name).copied().unwrap_or(default)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
