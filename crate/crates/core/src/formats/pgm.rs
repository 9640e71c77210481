//! Binary 8-bit PGM ("P5", maxval 255).

use std::path::{Path, PathBuf};

use super::FormatError;
use crate::imaging::GrayFrame;

/// Header tokens are whitespace separated; `#` starts a comment to end of line.
fn header_tokens(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return None;
    }
    Some((tokens, i + 1))
}

/// `path` only labels errors.
pub fn decode_pgm(bytes: &[u8], path: &Path, frame_index: u64) -> Result<GrayFrame, FormatError> {
    let bad = |m: &str| FormatError::invalid(path, m);
    let (tokens, offset) = header_tokens(bytes, 4).ok_or_else(|| bad("truncated PGM header"))?;
    if tokens[0] != "P5" {
        return Err(bad(&format!("expected binary PGM magic P5, found '{}'", tokens[0])));
    }
    let num = |t: &str, what: &str| -> Result<usize, FormatError> {
        t.parse()
            .map_err(|_| bad(&format!("bad {what} '{t}'")))
    };
    let width = num(&tokens[1], "width")?;
    let height = num(&tokens[2], "height")?;
    let maxval = num(&tokens[3], "maxval")?;
    if maxval != 255 {
        return Err(bad(&format!("maxval must be 255, found {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(bad("empty image"));
    }
    let raster = &bytes[offset..];
    if raster.len() != width * height {
        return Err(bad(&format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            width * height
        )));
    }
    let data = raster.iter().map(|&b| b as f64).collect();
    GrayFrame::new(width, height, data, frame_index).map_err(|e| bad(&e.to_string()))
}

/// Intensities rounded to the nearest integer.
pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.intensities().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn read_pgm(path: &Path, frame_index: u64) -> Result<GrayFrame, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_pgm(&bytes, path, frame_index)
}

pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<(), FormatError> {
    std::fs::write(path, encode_pgm(frame)).map_err(|e| FormatError::io(path, e))
}

/// Every `*.pgm` file in `dir`, in lexicographic filename order; frame
/// indices follow that order from 0.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<GrayFrame>, FormatError> {
    let entries = std::fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| FormatError::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            paths.push(p);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.is_empty() {
        return Err(FormatError::invalid(dir, "no .pgm frames found"));
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| read_pgm(p, i as u64))
        .collect()
}
