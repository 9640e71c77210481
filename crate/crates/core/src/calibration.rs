//! Landmark calibration: per-landmark Kalman tracks that fuse the position
//! predicted by validated optical flow with the detector's measurement.
//!
//! The state is the 2-D landmark position. A validated flow vector is applied
//! as a deterministic motion increment; a rejected one leaves the mean in
//! place and inflates the process noise so the next detection dominates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{forward_backward_check, FlowConfig, ValidatedFlow};
use crate::imaging::{build_pyramid, GrayFrame, ImagePyramid, ImagingError};

pub type Point2 = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("{frames} frames but {detections} detection records")]
    LengthMismatch { frames: usize, detections: usize },
    #[error("frame indices must be strictly increasing and aligned (position {position})")]
    NonMonotoneFrames { position: usize },
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("landmark frame {frame} has {found} points, expected {expected}")]
    LandmarkCount {
        frame: u64,
        found: usize,
        expected: usize,
    },
    #[error("non-finite landmark coordinate in frame {frame}")]
    NonFinite { frame: u64 },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandmarkSource {
    Detected,
    Calibrated,
}

/// All landmark positions of one frame, in the standard 68-point order.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub points: Vec<Point2>,
    pub source: LandmarkSource,
}

impl LandmarkFrame {
    pub fn new(frame_index: u64, points: Vec<Point2>, source: LandmarkSource) -> Self {
        Self {
            frame_index,
            points,
            source,
        }
    }

    pub fn validate(&self, expected: usize) -> Result<(), CalibrationError> {
        if self.points.len() != expected {
            return Err(CalibrationError::LandmarkCount {
                frame: self.frame_index,
                found: self.points.len(),
                expected,
            });
        }
        if self.points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(CalibrationError::NonFinite {
                frame: self.frame_index,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    /// Per-axis process noise added on every prediction (px²).
    pub process_noise_q: f64,
    /// Per-axis detector noise (px²).
    pub measurement_noise_r: f64,
    /// Multiplier on `q` when the flow prediction is rejected.
    pub reject_inflation: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_noise_q: 0.25,
            measurement_noise_r: 1.0,
            reject_inflation: 4.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.process_noise_q >= 0.0 && self.process_noise_q.is_finite()) {
            return Err(CalibrationError::InvalidConfig("process_noise_q must be >= 0".into()));
        }
        if !(self.measurement_noise_r > 0.0 && self.measurement_noise_r.is_finite()) {
            return Err(CalibrationError::InvalidConfig(
                "measurement_noise_r must be > 0".into(),
            ));
        }
        if !(self.reject_inflation >= 1.0 && self.reject_inflation.is_finite()) {
            return Err(CalibrationError::InvalidConfig(
                "reject_inflation must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Position-only Kalman state for one landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanTrack {
    pub state_mean: Point2,
    pub state_cov: [[f64; 2]; 2],
    pub process_noise_q: f64,
    pub measurement_noise_r: f64,
    pub reject_inflation: f64,
}

impl KalmanTrack {
    pub fn trace(&self) -> f64 {
        self.state_cov[0][0] + self.state_cov[1][1]
    }

    pub fn is_well_formed(&self) -> bool {
        let c = &self.state_cov;
        let sym = (c[0][1] - c[1][0]).abs() <= 1e-9;
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        sym && c[0][0] >= 0.0 && c[1][1] >= 0.0 && det >= -1e-9
    }
}

pub fn kalman_init(first_detection: Point2, cfg: &KalmanConfig) -> KalmanTrack {
    let r = cfg.measurement_noise_r;
    KalmanTrack {
        state_mean: first_detection,
        state_cov: [[r, 0.0], [0.0, r]],
        process_noise_q: cfg.process_noise_q,
        measurement_noise_r: r,
        reject_inflation: cfg.reject_inflation,
    }
}

pub fn kalman_predict(track: &KalmanTrack, flow: &ValidatedFlow) -> KalmanTrack {
    let mut next = *track;
    let q = if flow.valid {
        next.state_mean[0] += flow.flow.u;
        next.state_mean[1] += flow.flow.v;
        track.process_noise_q
    } else {
        track.reject_inflation * track.process_noise_q
    };
    next.state_cov[0][0] += q;
    next.state_cov[1][1] += q;
    next
}

/// Measurement update with identity observation: `K = P (P + R)^-1`.
pub fn kalman_update(track: &KalmanTrack, measurement: Point2) -> KalmanTrack {
    let p = track.state_cov;
    let r = track.measurement_noise_r;
    let s = [[p[0][0] + r, p[0][1]], [p[1][0], p[1][1] + r]];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let s_inv = [
        [s[1][1] / det, -s[0][1] / det],
        [-s[1][0] / det, s[0][0] / det],
    ];
    let k = mat_mul(&p, &s_inv);
    let innovation = [
        measurement[0] - track.state_mean[0],
        measurement[1] - track.state_mean[1],
    ];
    let mean = [
        track.state_mean[0] + k[0][0] * innovation[0] + k[0][1] * innovation[1],
        track.state_mean[1] + k[1][0] * innovation[0] + k[1][1] * innovation[1],
    ];
    let i_minus_k = [[1.0 - k[0][0], -k[0][1]], [-k[1][0], 1.0 - k[1][1]]];
    let mut cov = mat_mul(&i_minus_k, &p);
    let off = 0.5 * (cov[0][1] + cov[1][0]);
    cov[0][1] = off;
    cov[1][0] = off;
    KalmanTrack {
        state_mean: mean,
        state_cov: cov,
        ..*track
    }
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Tallies from one calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub frames: usize,
    pub landmarks: usize,
    /// Rejected flow predictions per landmark.
    pub rejected_per_landmark: Vec<usize>,
    /// Mean finite forward-backward error per frame; frame 0 has none.
    pub mean_fb_error_per_frame: Vec<Option<f64>>,
}

impl CalibrationReport {
    pub fn rejected_flow_count(&self) -> usize {
        self.rejected_per_landmark.iter().sum()
    }

    /// Mean over every finite forward-backward error of the run.
    pub fn mean_fb_error(&self) -> Option<f64> {
        let finite: Vec<f64> = self.mean_fb_error_per_frame.iter().flatten().copied().collect();
        (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64)
    }

    /// Machine-readable summary.
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            frames: self.frames,
            landmarks: self.landmarks,
            rejected_flow_count: self.rejected_flow_count(),
            mean_fb_error: self.mean_fb_error(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("landmark calibration report\n");
        out.push_str(&format!("frames processed: {}\n", self.frames));
        out.push_str(&format!("landmarks per frame: {}\n", self.landmarks));
        out.push_str("frame 0: passed through uncalibrated (track initialization)\n");
        out.push_str(&format!(
            "rejected flow predictions: {} of {}\n",
            self.rejected_flow_count(),
            self.frames.saturating_sub(1) * self.landmarks
        ));
        match self.mean_fb_error() {
            Some(e) => out.push_str(&format!("mean forward-backward error: {e} px\n")),
            None => out.push_str("mean forward-backward error: n/a\n"),
        }
        let worst = self
            .rejected_per_landmark
            .iter()
            .enumerate()
            .max_by_key(|(i, c)| (**c, std::cmp::Reverse(*i)));
        if let Some((j, c)) = worst {
            out.push_str(&format!("most rejected landmark: {j} ({c} rejections)\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub frames: usize,
    pub landmarks: usize,
    pub rejected_flow_count: usize,
    pub mean_fb_error: Option<f64>,
}

fn check_inputs(
    frames: &[GrayFrame],
    detections: &[LandmarkFrame],
) -> Result<usize, CalibrationError> {
    if frames.len() != detections.len() {
        return Err(CalibrationError::LengthMismatch {
            frames: frames.len(),
            detections: detections.len(),
        });
    }
    if frames.len() < 2 {
        return Err(CalibrationError::TooFewFrames(frames.len()));
    }
    for (i, (f, d)) in frames.iter().zip(detections).enumerate() {
        if f.frame_index != d.frame_index {
            return Err(CalibrationError::NonMonotoneFrames { position: i });
        }
        if i > 0 && f.frame_index <= frames[i - 1].frame_index {
            return Err(CalibrationError::NonMonotoneFrames { position: i });
        }
    }
    let count = detections[0].points.len();
    for d in detections {
        d.validate(count)?;
    }
    Ok(count)
}

/// Calibrates a detection sequence against its frames.
///
/// Frame 0 initializes the tracks and passes through unchanged. For every
/// later frame each landmark's previous calibrated position is flowed
/// forward, the validated flow drives the prediction and the detection the
/// update; the posterior means are emitted.
pub fn calibrate_sequence(
    frames: &[GrayFrame],
    detections: &[LandmarkFrame],
    flow_cfg: &FlowConfig,
    kalman_cfg: &KalmanConfig,
) -> Result<(Vec<LandmarkFrame>, CalibrationReport), CalibrationError> {
    flow_cfg
        .validate()
        .map_err(|e| CalibrationError::InvalidConfig(e.to_string()))?;
    kalman_cfg.validate()?;
    let num_points = check_inputs(frames, detections)?;

    let pyramid = |f: &GrayFrame| -> Result<ImagePyramid, CalibrationError> {
        Ok(build_pyramid(f, flow_cfg.num_levels, flow_cfg.scale_factor)?)
    };

    let mut tracks: Vec<KalmanTrack> = detections[0]
        .points
        .iter()
        .map(|&p| kalman_init(p, kalman_cfg))
        .collect();
    let mut output = Vec::with_capacity(frames.len());
    output.push(LandmarkFrame::new(
        detections[0].frame_index,
        detections[0].points.clone(),
        LandmarkSource::Calibrated,
    ));
    let mut report = CalibrationReport {
        frames: frames.len(),
        landmarks: num_points,
        rejected_per_landmark: vec![0; num_points],
        mean_fb_error_per_frame: vec![None],
    };

    let mut prev_pyr = pyramid(&frames[0])?;
    for t in 1..frames.len() {
        let next_pyr = pyramid(&frames[t])?;
        let (w, h) = (frames[t].width() as f64, frames[t].height() as f64);
        let mut fb_sum = 0.0;
        let mut fb_count = 0usize;
        for (j, track) in tracks.iter_mut().enumerate() {
            let [x, y] = track.state_mean;
            let flow = if x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0 {
                forward_backward_check(&prev_pyr, &next_pyr, (x, y), flow_cfg)
            } else {
                ValidatedFlow::rejected()
            };
            if !flow.valid {
                report.rejected_per_landmark[j] += 1;
            }
            if flow.fb_error.is_finite() {
                fb_sum += flow.fb_error;
                fb_count += 1;
            }
            let predicted = kalman_predict(track, &flow);
            *track = kalman_update(&predicted, detections[t].points[j]);
        }
        report
            .mean_fb_error_per_frame
            .push((fb_count > 0).then(|| fb_sum / fb_count as f64));
        output.push(LandmarkFrame::new(
            detections[t].frame_index,
            tracks.iter().map(|tr| tr.state_mean).collect(),
            LandmarkSource::Calibrated,
        ));
        prev_pyr = next_pyr;
    }
    Ok((output, report))
}
