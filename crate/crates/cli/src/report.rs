use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::Result;

/// Schema tag written in every row; bump when columns change.
pub const SCHEMA: &str = "embedlab-report-v1";

pub const HEADER: [&str; 9] = [
    "schema", "check", "trial", "seed", "status", "empirical", "bound", "ratio", "details",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
    /// Measurement without a pass criterion.
    Info,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Status::Fail | Status::Error)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
            Status::Info => "info",
        })
    }
}

/// One report row per (check, trial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub schema: String,
    pub check: String,
    pub trial: u64,
    pub seed: u64,
    pub status: Status,
    pub empirical: Option<f64>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    /// `key=value` pairs separated by `;`.
    pub details: String,
}

impl Row {
    pub fn new(check: &str, trial: u64, seed: u64, status: Status) -> Self {
        Row {
            schema: SCHEMA.to_string(),
            check: check.to_string(),
            trial,
            seed,
            status,
            empirical: None,
            bound: None,
            ratio: None,
            details: String::new(),
        }
    }

    /// Sets both sides of a checked inequality and their ratio.
    pub fn sides(mut self, empirical: f64, bound: f64) -> Self {
        self.empirical = Some(empirical);
        self.bound = Some(bound);
        self.ratio = (bound != 0.0).then(|| empirical / bound);
        self
    }

    pub fn empirical(mut self, value: f64) -> Self {
        self.empirical = Some(value);
        self
    }

    pub fn detail(mut self, key: &str, value: impl fmt::Display) -> Self {
        if !self.details.is_empty() {
            self.details.push(';');
        }
        self.details.push_str(&format!("{key}={value}"));
        self
    }

    pub fn error(check: &str, trial: u64, seed: u64, message: impl fmt::Display) -> Self {
        Row::new(check, trial, seed, Status::Error).detail("error", message.to_string().replace(';', ","))
    }
}

pub fn write_rows<W: Write>(rows: &[Row], format: Format, mut writer: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            if rows.is_empty() {
                w.write_record(HEADER)?;
            }
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut writer, rows)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

pub fn rows_to_bytes(rows: &[Row], format: Format) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_rows(rows, format, &mut buf)?;
    Ok(buf)
}
