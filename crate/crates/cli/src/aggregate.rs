use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use embedlab_core::distortion::empirical_quantile;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::{Row, Status, HEADER, SCHEMA};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub check: String,
    pub rows: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub pass_rate: f64,
    pub ratio_q05: Option<f64>,
    pub ratio_q50: Option<f64>,
    pub ratio_q95: Option<f64>,
    pub ratio_max: Option<f64>,
}

fn mismatch(file: &Path, message: impl Into<String>) -> CliError {
    CliError::SchemaMismatch {
        file: file.display().to_string(),
        message: message.into(),
    }
}

pub fn read_report(path: &Path) -> Result<Vec<Row>> {
    let rows: Vec<Row> = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_reader(std::fs::File::open(path)?).map_err(|e| mismatch(path, e.to_string()))?
    } else {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        if header.is_empty() {
            return Ok(Vec::new());
        }
        if header.iter().ne(HEADER) {
            return Err(mismatch(path, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
        }
        reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| mismatch(path, e.to_string()))?
    };
    if let Some(r) = rows.iter().find(|r| r.schema != SCHEMA) {
        return Err(mismatch(path, format!("schema `{}`, expected `{SCHEMA}`", r.schema)));
    }
    Ok(rows)
}

/// Per-check pass counts and ratio quantiles, ordered by check name.
pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut groups: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.check).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(check, rs)| {
            let count = |s: Status| rs.iter().filter(|r| r.status == s).count();
            let ratios: Vec<f64> = rs.iter().filter_map(|r| r.ratio).filter(|x| x.is_finite()).collect();
            let q = |p: f64| empirical_quantile(&ratios, p).ok();
            Summary {
                check: check.to_string(),
                rows: rs.len(),
                passed: count(Status::Pass),
                failed: count(Status::Fail),
                errors: count(Status::Error),
                pass_rate: count(Status::Pass) as f64 / rs.len() as f64,
                ratio_q05: q(0.05),
                ratio_q50: q(0.5),
                ratio_q95: q(0.95),
                ratio_max: q(1.0),
            }
        })
        .collect()
}

pub fn aggregate<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<Summary>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_report(p.as_ref())?);
    }
    Ok(summarize(&rows))
}

pub const SUMMARY_HEADER: [&str; 10] = [
    "check", "rows", "passed", "failed", "errors", "pass_rate", "ratio_q05", "ratio_q50", "ratio_q95",
    "ratio_max",
];

pub fn write_summary<W: Write>(summary: &[Summary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if summary.is_empty() {
        w.write_record(SUMMARY_HEADER)?;
    }
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
