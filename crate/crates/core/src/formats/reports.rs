//! Loss logs, evaluation reports and `sample_id,<value>` tables.

use std::path::Path;

use super::{parse_real, FormatError};
use crate::pipeline::{EvalResult, LossRecord};

pub const LOSS_HEADER: &str = "epoch,stream,mean_loss";
pub const EVAL_HEADER: &str = "sample_id,label,prediction,residual";

pub fn write_loss_log(path: &Path, log: &[LossRecord]) -> Result<(), FormatError> {
    let mut out = format!("{LOSS_HEADER}\n");
    for r in log {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.stream.as_str(), r.mean_loss));
    }
    super::write_text(path, &out)
}

/// Per-sample rows, then `# RMSE=<r> MAE=<m>`.
pub fn write_evaluation_report(
    path: &Path,
    ids: &[String],
    labels: &[f64],
    predictions: &[f64],
    result: &EvalResult,
) -> Result<(), FormatError> {
    let mut out = format!("{EVAL_HEADER}\n");
    for (((id, label), prediction), residual) in ids.iter().zip(labels).zip(predictions).zip(&result.residuals) {
        out.push_str(&format!("{id},{label},{prediction},{residual}\n"));
    }
    out.push_str(&format!("# RMSE={} MAE={}\n", result.rmse, result.mae));
    super::write_text(path, &out)
}

pub fn write_value_csv(path: &Path, column: &str, rows: &[(String, f64)]) -> Result<(), FormatError> {
    let mut out = format!("sample_id,{column}\n");
    for (id, v) in rows {
        out.push_str(&format!("{id},{v}\n"));
    }
    super::write_text(path, &out)
}

/// Two-column `sample_id,<anything>` table.
pub fn read_value_csv(path: &Path) -> Result<Vec<(String, f64)>, FormatError> {
    let text = super::read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| FormatError::parse(path, 1, e.to_string()))?;
    if header.len() != 2 || &header[0] != "sample_id" {
        return Err(FormatError::parse(path, 1, "expected header 'sample_id,<value>'"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            FormatError::parse(path, e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((record[0].to_string(), parse_real(path, line, &record[1], "value")?));
    }
    Ok(rows)
}
