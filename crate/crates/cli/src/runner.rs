use std::time::Instant;

use rayon::prelude::*;

use crate::checks::{run_trial, trial_seed};
use crate::config::{CheckName, ExperimentConfig};
use crate::error::Result;
use crate::manifest::{CheckRecord, RunManifest};
use crate::report::{Row, SCHEMA};
use crate::ARTIFACT_VERSION;

pub struct RunOutput {
    pub rows: Vec<Row>,
    pub manifest: RunManifest,
}

impl RunOutput {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| !r.status.is_failure())
    }
}

/// Runs `jobs` workers (all cores when `None`). `op` executes inside the pool.
pub fn with_pool<T: Send>(jobs: Option<usize>, op: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    Ok(builder.build()?.install(op))
}

pub fn run(cfg: &ExperimentConfig, checks: &[CheckName], jobs: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    with_pool(jobs, || {
        let mut rows = Vec::new();
        let mut records = Vec::new();
        for &check in checks {
            let start = Instant::now();
            let batch: Vec<Row> = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(cfg, check, t))
                .collect();
            records.push(CheckRecord {
                check: check.name().to_string(),
                seeds: (0..cfg.trials as u64).map(|t| trial_seed(cfg, check, t)).collect(),
                wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            rows.extend(batch);
        }
        RunOutput {
            rows,
            manifest: RunManifest {
                artifact_version: ARTIFACT_VERSION.to_string(),
                schema: SCHEMA.to_string(),
                config_hash: cfg.hash(),
                master_seed: cfg.master_seed,
                checks: records,
                report: None,
            },
        }
    })
}

/// Runs the checks listed in the config.
pub fn run_config(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<RunOutput> {
    run(cfg, &cfg.checks, jobs)
}
