//! Report serialization: long-format CSV and JSON files.
//!
//! Every experiment writes exactly one file named `<experiment>.<ext>`
//! into the output directory. The CSV flavour is a long-format table
//!
//! ```text
//! # schema=1
//! time,statistic,value
//! 0.5,mean_l2,0.123
//! ,balance_pass_fraction,1
//! ```
//!
//! where rows without a time column carry run-level scalars. Floats are
//! printed with Rust's shortest round-trip formatting, so re-parsing a
//! file recovers the exact binary values and two runs are comparable
//! byte for byte. The JSON flavour serializes the full report structure.

use crate::error::LlbError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Schema tag stamped at the top of every CSV report.
const CSV_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn name(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Option<ReportFormat> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }

    pub fn extension(&self) -> &'static str {
        self.name()
    }
}

/// One row of the long-format table. `time` is empty for run-level
/// scalars.
#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub time: Option<f64>,
    pub statistic: String,
    pub value: f64,
}

impl CsvRow {
    pub fn series(time: f64, statistic: impl Into<String>, value: f64) -> CsvRow {
        CsvRow {
            time: Some(time),
            statistic: statistic.into(),
            value,
        }
    }

    pub fn scalar(statistic: impl Into<String>, value: f64) -> CsvRow {
        CsvRow {
            time: None,
            statistic: statistic.into(),
            value,
        }
    }
}

/// Implemented by every experiment report that can flatten itself into
/// the long-format table.
pub trait CsvRender {
    fn csv_rows(&self) -> Vec<CsvRow>;
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schema={CSV_SCHEMA}");
    let _ = writeln!(out, "time,statistic,value");
    for row in rows {
        debug_assert!(
            !row.statistic.contains([',', '\n']),
            "statistic name {:?} would break the table",
            row.statistic
        );
        match row.time {
            Some(t) => {
                let _ = writeln!(out, "{t},{},{}", row.statistic, row.value);
            }
            None => {
                let _ = writeln!(out, ",{},{}", row.statistic, row.value);
            }
        }
    }
    out
}

/// Write a report as `<dir>/<stem>.<ext>` and return the path.
pub fn write_report<T: CsvRender + Serialize>(
    dir: &Path,
    stem: &str,
    format: ReportFormat,
    report: &T,
) -> Result<PathBuf, LlbError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let body = match format {
        ReportFormat::Csv => render_csv(&report.csv_rows()),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| {
                LlbError::invalid_parameter("report", format!("serialization failed: {e}"))
            })?;
            s.push('\n');
            s
        }
    };
    std::fs::write(&path, body)?;
    Ok(path)
}

/// On an aborted run, leave a machine-readable trace of what happened
/// instead of the report. Returns the path written.
pub fn write_error_report(dir: &Path, stem: &str, error: &LlbError) -> Result<PathBuf, LlbError> {
    #[derive(Serialize)]
    struct ErrorReport {
        error: String,
        blowup_time: Option<f64>,
    }
    let blowup_time = match error {
        LlbError::Blowup { t, .. } => Some(*t),
        _ => None,
    };
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.error.json"));
    let mut body = serde_json::to_string_pretty(&ErrorReport {
        error: error.to_string(),
        blowup_time,
    })
    .map_err(|e| LlbError::invalid_parameter("report", format!("serialization failed: {e}")))?;
    body.push('\n');
    std::fs::write(&path, body)?;
    Ok(path)
}

/// Caveat surfaced for configurations that are supported but not yet
/// performance-tuned or covered by the full validation battery.
pub fn experimental_note(dim: usize) -> Option<&'static str> {
    if dim == 2 {
        Some(
            "note: two-dimensional runs are experimental; the closed-form checks run in d = 1 \
             and 2, but the large-ensemble validation battery runs in d = 1",
        )
    } else {
        None
    }
}
