//! Browser bindings for the interactive demo in `www/`.
//!
//! Every export also works natively so the demo logic is testable with
//! plain `cargo test`.

use facemotion::calibration::{calibrate_sequence, KalmanConfig, LandmarkFrame, LandmarkSource};
use facemotion::flow::{forward_backward_check, FlowConfig};
use facemotion::imaging::{build_pyramid, GrayFrame};
use facemotion::synth::{gen_sample, gen_trajectory, render_frames, TrajectoryConfig, DEFAULT_BLOB_SIGMA};
use wasm_bindgen::prelude::*;

fn to_bytes(frame: &GrayFrame) -> Vec<u8> {
    frame.intensities().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
}

fn flatten(frames: &[LandmarkFrame]) -> Vec<f64> {
    frames.iter().flat_map(|f| f.points.iter().flat_map(|p| [p[0], p[1]])).collect()
}

/// One blob tracked between two rendered frames.
#[wasm_bindgen]
pub struct BlobTrack {
    size: u32,
    u: f64,
    v: f64,
    fb_error: f64,
    valid: bool,
    prev: Vec<u8>,
    next: Vec<u8>,
}

#[wasm_bindgen]
impl BlobTrack {
    pub fn size(&self) -> u32 {
        self.size
    }
    pub fn u(&self) -> f64 {
        self.u
    }
    pub fn v(&self) -> f64 {
        self.v
    }
    /// Round-trip error in pixels; infinite when a solve failed.
    pub fn fb_error(&self) -> f64 {
        self.fb_error
    }
    pub fn valid(&self) -> bool {
        self.valid
    }
    pub fn prev_pixels(&self) -> Vec<u8> {
        self.prev.clone()
    }
    pub fn next_pixels(&self) -> Vec<u8> {
        self.next.clone()
    }
}

/// Renders a blob at `(x, y)` and at `(x + dx, y + dy)` on a `size`² canvas
/// and tracks it with the forward-backward check.
#[wasm_bindgen]
pub fn track_blob(size: u32, x: f64, y: f64, dx: f64, dy: f64, levels: u32, tau: f64) -> Result<BlobTrack, String> {
    let truth = vec![
        LandmarkFrame::new(0, vec![[x, y]], LandmarkSource::Detected),
        LandmarkFrame::new(1, vec![[x + dx, y + dy]], LandmarkSource::Detected),
    ];
    let n = size as usize;
    let frames = render_frames(&truth, n, n, DEFAULT_BLOB_SIGMA, 0).map_err(|e| e.to_string())?;
    let cfg = FlowConfig {
        num_levels: levels as usize,
        fb_threshold_tau: tau,
        ..FlowConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let pa = build_pyramid(&frames[0], cfg.num_levels, cfg.scale_factor).map_err(|e| e.to_string())?;
    let pb = build_pyramid(&frames[1], cfg.num_levels, cfg.scale_factor).map_err(|e| e.to_string())?;
    let r = forward_backward_check(&pa, &pb, (x, y), &cfg);
    Ok(BlobTrack {
        size,
        u: r.flow.u,
        v: r.flow.v,
        fb_error: r.fb_error,
        valid: r.valid,
        prev: to_bytes(&frames[0]),
        next: to_bytes(&frames[1]),
    })
}

/// A calibrated synthetic sequence with its truth and raw detections.
#[wasm_bindgen]
pub struct CalibrationRun {
    width: u32,
    height: u32,
    landmarks: u32,
    truth: Vec<f64>,
    raw: Vec<f64>,
    calibrated: Vec<f64>,
    raw_error: f64,
    calibrated_error: f64,
    rejected: u32,
    frames: Vec<Vec<u8>>,
}

#[wasm_bindgen]
impl CalibrationRun {
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn frame_count(&self) -> u32 {
        self.frames.len() as u32
    }
    pub fn landmarks(&self) -> u32 {
        self.landmarks
    }
    /// Frame-major `x, y` pairs.
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    pub fn raw(&self) -> Vec<f64> {
        self.raw.clone()
    }
    pub fn calibrated(&self) -> Vec<f64> {
        self.calibrated.clone()
    }
    pub fn raw_error(&self) -> f64 {
        self.raw_error
    }
    pub fn calibrated_error(&self) -> f64 {
        self.calibrated_error
    }
    pub fn rejected(&self) -> u32 {
        self.rejected
    }
    pub fn frame_pixels(&self, index: u32) -> Vec<u8> {
        self.frames.get(index as usize).cloned().unwrap_or_default()
    }
}

fn mean_error(a: &[LandmarkFrame], b: &[LandmarkFrame]) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for (fa, fb) in a.iter().zip(b) {
        for (p, q) in fa.points.iter().zip(&fb.points) {
            total += (p[0] - q[0]).hypot(p[1] - q[1]);
            n += 1;
        }
    }
    total / n.max(1) as f64
}

/// Generates a jittered sequence and calibrates it with process noise `q`
/// and detector noise `r`.
#[wasm_bindgen]
pub fn run_calibration(
    seed: u32,
    num_frames: u32,
    jitter: f64,
    outlier_rate: f64,
    q: f64,
    r: f64,
) -> Result<CalibrationRun, String> {
    let cfg = TrajectoryConfig {
        num_frames: num_frames as usize,
        motion_amplitude: 3.0,
        jitter_sigma: jitter,
        outlier_rate,
        seed: seed as u64,
        ..TrajectoryConfig::default()
    };
    let sample = gen_sample(&cfg, true).map_err(|e| e.to_string())?;
    let kalman = KalmanConfig {
        process_noise_q: q,
        measurement_noise_r: r,
        ..KalmanConfig::default()
    };
    let (calibrated, report) =
        calibrate_sequence(&sample.frames, &sample.noisy_detections, &FlowConfig::default(), &kalman)
            .map_err(|e| e.to_string())?;
    Ok(CalibrationRun {
        width: cfg.width as u32,
        height: cfg.height as u32,
        landmarks: cfg.num_landmarks as u32,
        truth: flatten(&sample.ground_truth),
        raw: flatten(&sample.noisy_detections),
        calibrated: flatten(&calibrated),
        raw_error: mean_error(&sample.noisy_detections, &sample.ground_truth),
        calibrated_error: mean_error(&calibrated, &sample.ground_truth),
        rejected: report.rejected_flow_count() as u32,
        frames: sample.frames.iter().map(to_bytes).collect(),
    })
}

/// Gaussian pyramid of one rendered face.
#[wasm_bindgen]
pub struct PyramidView {
    dims: Vec<(u32, u32)>,
    levels: Vec<Vec<u8>>,
}

#[wasm_bindgen]
impl PyramidView {
    pub fn level_count(&self) -> u32 {
        self.levels.len() as u32
    }
    pub fn width(&self, level: u32) -> u32 {
        self.dims.get(level as usize).map_or(0, |d| d.0)
    }
    pub fn height(&self, level: u32) -> u32 {
        self.dims.get(level as usize).map_or(0, |d| d.1)
    }
    pub fn pixels(&self, level: u32) -> Vec<u8> {
        self.levels.get(level as usize).cloned().unwrap_or_default()
    }
}

#[wasm_bindgen]
pub fn pyramid_view(seed: u32, levels: u32, scale_factor: f64) -> Result<PyramidView, String> {
    let cfg = TrajectoryConfig {
        num_frames: 2,
        seed: seed as u64,
        ..TrajectoryConfig::default()
    };
    let truth = gen_trajectory(&cfg).map_err(|e| e.to_string())?;
    let frame = render_frames(&truth[..1], cfg.width, cfg.height, cfg.blob_sigma, cfg.seed)
        .map_err(|e| e.to_string())?
        .remove(0);
    let pyr = build_pyramid(&frame, levels as usize, scale_factor).map_err(|e| e.to_string())?;
    Ok(PyramidView {
        dims: pyr.levels.iter().map(|l| (l.width() as u32, l.height() as u32)).collect(),
        levels: pyr.levels.iter().map(to_bytes).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_is_tracked() {
        let t = track_blob(64, 30.0, 32.0, 2.0, 0.0, 3, 1.0).unwrap();
        assert!(t.valid());
        assert!((t.u() - 2.0).abs() < 0.1 && t.v().abs() < 0.1);
        assert_eq!(t.prev_pixels().len(), 64 * 64);
        assert!(track_blob(64, 30.0, 32.0, 2.0, 0.0, 0, 1.0).is_err());
    }

    #[test]
    fn calibration_run_shapes() {
        let run = run_calibration(1, 12, 2.0, 0.0, 0.25, 1.0).unwrap();
        assert_eq!(run.frame_count(), 12);
        assert_eq!(run.truth().len(), 12 * 68 * 2);
        assert_eq!(run.calibrated().len(), run.raw().len());
        assert_eq!(run.frame_pixels(0).len(), (run.width() * run.height()) as usize);
        assert!(run.frame_pixels(99).is_empty());
        assert!(run.calibrated_error() < run.raw_error());
    }

    #[test]
    fn pyramid_levels_shrink() {
        let p = pyramid_view(0, 3, 0.5).unwrap();
        assert_eq!(p.level_count(), 3);
        assert_eq!((p.width(0), p.width(1), p.width(2)), (256, 128, 64));
        assert_eq!(p.pixels(2).len(), 64 * 64);
    }
}
