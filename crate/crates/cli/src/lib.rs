//! Configuration-driven runner for the `embedlab` experiments: parses a TOML
//! config, runs the named checks over seeded trials, and writes CSV/JSON rows
//! plus a run manifest.

pub mod aggregate;
pub mod checks;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod suites;

pub use error::{CliError, Result};

/// Version string recorded in manifests.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
