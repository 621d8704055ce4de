//! CSV ingestion, series transforms, and series emission.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How to turn a raw data column into the working series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    /// Price levels to annualized quarterly log differences:
    /// P_t -> 400 (ln P_t - ln P_{t-1}), dropping the first observation.
    AnnualizedLogDiff,
}

/// Where the input series comes from and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: String,
    /// Column name, or a 0-based index given as digits.
    pub column: String,
    #[serde(default)]
    pub transform: Transform,
    /// Free-text frequency note carried into reports.
    #[serde(default)]
    pub frequency: String,
}

/// Reads the configured column and applies the transform.
pub fn ingest(dataset: &DatasetSpec) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(Path::new(&dataset.path))
        .map_err(|e| CliError::Data(format!("{}: {e}", dataset.path)))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", dataset.path)))?
        .clone();
    let column = match headers.iter().position(|h| h == dataset.column) {
        Some(idx) => idx,
        None => dataset.column.parse::<usize>().map_err(|_| {
            CliError::Data(format!(
                "column '{}' not found in header {:?}",
                dataset.column,
                headers.iter().collect::<Vec<_>>()
            ))
        })?,
    };
    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers reported to the user are 1-based data rows (the header
        // is row 0).
        let row = i + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let field = record
            .get(column)
            .ok_or_else(|| CliError::Data(format!("row {row}: missing column {column}")))?;
        let value: f64 = field
            .trim()
            .parse()
            .map_err(|_| CliError::Data(format!("row {row}: cannot parse '{field}'")))?;
        if !value.is_finite() {
            return Err(CliError::Data(format!("row {row}: non-finite value")));
        }
        raw.push((row, value));
    }
    apply_transform(&raw, dataset.transform)
}

fn apply_transform(raw: &[(usize, f64)], transform: Transform) -> Result<Vec<f64>, CliError> {
    match transform {
        Transform::None => Ok(raw.iter().map(|(_, v)| *v).collect()),
        Transform::AnnualizedLogDiff => {
            for (row, value) in raw {
                if *value <= 0.0 {
                    return Err(CliError::Data(format!(
                        "row {row}: non-positive price {value} under log transform"
                    )));
                }
            }
            Ok(raw
                .windows(2)
                .map(|w| 400.0 * (w[1].1.ln() - w[0].1.ln()))
                .collect())
        }
    }
}

/// Writes a series as `t,value` CSV with 17 significant digits, which
/// round-trips f64 exactly.
pub fn emit_series<W: std::io::Write>(mut out: W, series: &[f64]) -> Result<(), CliError> {
    writeln!(out, "t,value").map_err(|e| CliError::Data(e.to_string()))?;
    for (t, v) in series.iter().enumerate() {
        writeln!(out, "{},{:.16e}", t + 1, v).map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}
