//! `frame,landmark,x,y` CSV, rows sorted by (frame, landmark).

use std::path::Path;

use super::{parse_real, FormatError};
use crate::calibration::{LandmarkFrame, LandmarkSource};

pub const LANDMARK_HEADER: [&str; 4] = ["frame", "landmark", "x", "y"];

pub fn read_landmarks_csv(path: &Path, source: LandmarkSource) -> Result<Vec<LandmarkFrame>, FormatError> {
    let text = super::read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| FormatError::parse(path, 1, e.to_string()))?;
    if header.iter().ne(LANDMARK_HEADER) {
        return Err(FormatError::parse(
            path,
            1,
            format!("expected header '{}', found '{}'", LANDMARK_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut frames: Vec<LandmarkFrame> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            FormatError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(FormatError::parse(path, line, format!("expected 4 fields, found {}", record.len())));
        }
        let frame: u64 = record[0]
            .parse()
            .map_err(|_| FormatError::parse(path, line, format!("frame: '{}' is not an index", &record[0])))?;
        let landmark: usize = record[1]
            .parse()
            .map_err(|_| FormatError::parse(path, line, format!("landmark: '{}' is not an index", &record[1])))?;
        let x = parse_real(path, line, &record[2], "x")?;
        let y = parse_real(path, line, &record[3], "y")?;

        match frames.last_mut() {
            Some(last) if last.frame_index == frame => {
                if landmark != last.points.len() {
                    return Err(FormatError::parse(
                        path,
                        line,
                        format!("landmark {landmark} out of order in frame {frame}; expected {}", last.points.len()),
                    ));
                }
                last.points.push([x, y]);
            }
            Some(last) if frame < last.frame_index => {
                return Err(FormatError::parse(path, line, format!("frame {frame} follows frame {}", last.frame_index)));
            }
            _ => {
                if landmark != 0 {
                    return Err(FormatError::parse(path, line, format!("frame {frame} starts at landmark {landmark}")));
                }
                if let Some(prev) = frames.last() {
                    if frames.len() > 1 && prev.points.len() != frames[0].points.len() {
                        return Err(FormatError::parse(path, line, format!("frame {} has {} landmarks, expected {}", prev.frame_index, prev.points.len(), frames[0].points.len())));
                    }
                }
                frames.push(LandmarkFrame::new(frame, vec![[x, y]], source));
            }
        }
    }
    if frames.is_empty() {
        return Err(FormatError::invalid(path, "no landmark rows"));
    }
    let p = frames[0].points.len();
    if let Some(f) = frames.iter().find(|f| f.points.len() != p) {
        return Err(FormatError::invalid(
            path,
            format!("frame {} has {} landmarks, expected {p}", f.frame_index, f.points.len()),
        ));
    }
    Ok(frames)
}

pub fn write_landmarks_csv(path: &Path, frames: &[LandmarkFrame]) -> Result<(), FormatError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| FormatError::invalid(path, e.to_string());
    writer.write_record(LANDMARK_HEADER).map_err(io)?;
    for f in frames {
        for (i, p) in f.points.iter().enumerate() {
            writer
                .write_record([f.frame_index.to_string(), i.to_string(), p[0].to_string(), p[1].to_string()])
                .map_err(io)?;
        }
    }
    let bytes = writer.into_inner().map_err(|e| FormatError::invalid(path, e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}
