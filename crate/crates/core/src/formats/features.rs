//! Feature CSV:
//!
//! ```text
//! # stream=absolute
//! # label=12.5
//! v0,v1,...,v135
//! ```

use std::path::Path;

use super::{parse_real, FormatError};
use crate::features::{FeatureSequence, StreamKind};

pub fn read_feature_csv(path: &Path) -> Result<FeatureSequence, FormatError> {
    let text = super::read_text(path)?;
    let mut lines = text.lines();
    let stream = match lines.next().and_then(|l| l.trim().strip_prefix("# stream=")) {
        Some("absolute") => StreamKind::Absolute,
        Some("differential") => StreamKind::Differential,
        Some(other) => return Err(FormatError::parse(path, 1, format!("unknown stream '{other}'"))),
        None => return Err(FormatError::parse(path, 1, "expected '# stream=absolute|differential'")),
    };
    let label = match lines.next().and_then(|l| l.trim().strip_prefix("# label=")) {
        Some("none") => None,
        Some(v) => Some(parse_real(path, 2, v, "label")?),
        None => return Err(FormatError::parse(path, 2, "expected '# label=<real|none>'")),
    };
    let body: String = lines.map(|l| format!("{l}\n")).collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() + 2);
            FormatError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() + 2);
        let row = record
            .iter()
            .enumerate()
            .map(|(i, f)| parse_real(path, line, f, &format!("column {i}")))
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = vectors.first() {
            if row.len() != first.len() {
                return Err(FormatError::parse(
                    path,
                    line,
                    format!("{} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        if row.len() % 2 != 0 {
            return Err(FormatError::parse(path, line, format!("odd column count {}", row.len())));
        }
        vectors.push(row);
    }
    FeatureSequence::new(vectors, stream, label).map_err(|e| FormatError::invalid(path, e.to_string()))
}

pub fn write_feature_csv(path: &Path, seq: &FeatureSequence) -> Result<(), FormatError> {
    let mut out = format!("# stream={}\n", seq.stream_kind.as_str());
    match seq.label {
        Some(l) => out.push_str(&format!("# label={l}\n")),
        None => out.push_str("# label=none\n"),
    }
    for v in &seq.vectors {
        let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    super::write_text(path, &out)
}
