//! Synthetic ground truth: smoothed landmark random walks, detection noise
//! with recorded outliers, blob-rendered frames and labelled datasets.
//!
//! Every generator is a pure function of its seed. Sub-streams are split with
//! [`derive_seed`]; sample `i` of a dataset uses
//! `derive_seed(derive_seed(seed, 4), i)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{LandmarkFrame, LandmarkSource, Point2};
use crate::features::AlignmentTemplate;
use crate::imaging::{gaussian_blur, GrayFrame};
use crate::rng::{
    derive_seed, seeded, TAG_NOISE, TAG_SAMPLE, TAG_SMOOTHNESS, TAG_TEXTURE, TAG_WALK,
};

pub const BACKGROUND_LEVEL: f64 = 64.0;
pub const BLOB_PEAK: f64 = 200.0;
pub const TEXTURE_AMPLITUDE: f64 = 10.0;
pub const DEFAULT_BLOB_SIGMA: f64 = 2.5;
pub const MAX_LABEL: f64 = 63.0;
pub const MIN_SMOOTHNESS: f64 = 0.1;
pub const MAX_SMOOTHNESS: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("landmark {landmark} of frame {frame} at ({x:.2}, {y:.2}) is too close to the border")]
    OutOfBounds {
        frame: u64,
        landmark: usize,
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub num_frames: usize,
    pub num_landmarks: usize,
    pub width: usize,
    pub height: usize,
    /// Resting positions in pixels; `None` means the canonical template
    /// scaled into the frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_layout: Option<Vec<Point2>>,
    pub motion_amplitude: f64,
    pub motion_smoothness: f64,
    /// Pull of each offset back toward its resting position per frame.
    pub mean_reversion: f64,
    /// Walk steps simulated before the first emitted frame.
    pub burn_in: usize,
    pub jitter_sigma: f64,
    pub outlier_rate: f64,
    pub outlier_magnitude: f64,
    pub blob_sigma: f64,
    pub seed: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            num_frames: 100,
            num_landmarks: 68,
            width: 256,
            height: 256,
            base_layout: None,
            motion_amplitude: 1.0,
            motion_smoothness: 0.8,
            mean_reversion: 0.0,
            burn_in: 0,
            jitter_sigma: 0.0,
            outlier_rate: 0.0,
            outlier_magnitude: 10.0,
            blob_sigma: DEFAULT_BLOB_SIGMA,
            seed: 0,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.num_frames < 2 {
            return bad("num_frames must be at least 2");
        }
        if self.num_landmarks == 0 {
            return bad("num_landmarks must be positive");
        }
        if !(self.motion_smoothness > 0.0 && self.motion_smoothness <= 1.0) {
            return bad("motion_smoothness must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mean_reversion) {
            return bad("mean_reversion must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return bad("outlier_rate must lie in [0, 1]");
        }
        for (name, v) in [
            ("motion_amplitude", self.motion_amplitude),
            ("jitter_sigma", self.jitter_sigma),
            ("outlier_magnitude", self.outlier_magnitude),
            ("blob_sigma", self.blob_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        match &self.base_layout {
            Some(l) if l.len() != self.num_landmarks => {
                bad("base_layout length differs from num_landmarks")
            }
            None if self.num_landmarks > crate::NUM_LANDMARKS => {
                bad("the canonical layout has only 68 landmarks")
            }
            _ => Ok(()),
        }
    }

    pub fn layout(&self) -> Vec<Point2> {
        match &self.base_layout {
            Some(l) => l.clone(),
            None => {
                let mut l = AlignmentTemplate::canonical()
                    .pixel_layout(self.width as f64, self.height as f64);
                l.truncate(self.num_landmarks);
                l
            }
        }
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Ground-truth trajectory.
///
/// Per landmark and axis: `v_t = s·v_{t-1} + (1 - s)·A·ξ_t` and
/// `o_t = ρ·o_{t-1} + v_t`, position `base + o_t`, with `ξ ~ N(0, 1)`.
pub fn gen_trajectory(cfg: &TrajectoryConfig) -> Result<Vec<LandmarkFrame>, SynthError> {
    cfg.validate()?;
    let base = cfg.layout();
    let n = base.len();
    let mut rng = seeded(derive_seed(cfg.seed, TAG_WALK));
    let s = cfg.motion_smoothness;
    let rho = cfg.mean_reversion;
    let mut velocity = vec![[0.0; 2]; n];
    let mut offset = vec![[0.0; 2]; n];
    let step = |velocity: &mut Vec<Point2>, offset: &mut Vec<Point2>, rng: &mut _| {
        for (v, o) in velocity.iter_mut().zip(offset.iter_mut()) {
            for a in 0..2 {
                let xi = normal(rng);
                v[a] = s * v[a] + (1.0 - s) * cfg.motion_amplitude * xi;
                o[a] = rho * o[a] + v[a];
            }
        }
    };
    for _ in 0..cfg.burn_in {
        step(&mut velocity, &mut offset, &mut rng);
    }
    let mut frames = Vec::with_capacity(cfg.num_frames);
    for t in 0..cfg.num_frames {
        if t > 0 {
            step(&mut velocity, &mut offset, &mut rng);
        }
        let points = base
            .iter()
            .zip(&offset)
            .map(|(b, o)| [b[0] + o[0], b[1] + o[1]])
            .collect();
        frames.push(LandmarkFrame::new(t as u64, points, LandmarkSource::Detected));
    }
    Ok(frames)
}

/// Noisy detections and, per frame, which points were replaced by outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDetections {
    pub frames: Vec<LandmarkFrame>,
    pub outliers: Vec<Vec<bool>>,
}

impl NoisyDetections {
    pub fn outlier_count(&self) -> usize {
        self.outliers.iter().flatten().filter(|&&o| o).count()
    }
}

/// Gaussian jitter on every point; with probability `outlier_rate` the
/// offset is instead exactly `outlier_magnitude` in a uniform direction.
pub fn add_detection_noise(
    truth: &[LandmarkFrame],
    cfg: &TrajectoryConfig,
) -> Result<NoisyDetections, SynthError> {
    cfg.validate()?;
    let mut rng = seeded(derive_seed(cfg.seed, TAG_NOISE));
    let mut frames = Vec::with_capacity(truth.len());
    let mut outliers = Vec::with_capacity(truth.len());
    for f in truth {
        let mut flags = Vec::with_capacity(f.points.len());
        let points = f
            .points
            .iter()
            .map(|p| {
                let is_outlier = cfg.outlier_rate > 0.0 && rng.random::<f64>() < cfg.outlier_rate;
                flags.push(is_outlier);
                let d = if is_outlier {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    [cfg.outlier_magnitude * theta.cos(), cfg.outlier_magnitude * theta.sin()]
                } else if cfg.jitter_sigma > 0.0 {
                    [cfg.jitter_sigma * normal(&mut rng), cfg.jitter_sigma * normal(&mut rng)]
                } else {
                    [0.0, 0.0]
                };
                [p[0] + d[0], p[1] + d[1]]
            })
            .collect();
        frames.push(LandmarkFrame::new(f.frame_index, points, LandmarkSource::Detected));
        outliers.push(flags);
    }
    Ok(NoisyDetections { frames, outliers })
}

/// Static texture of amplitude ±[`TEXTURE_AMPLITUDE`]: blurred uniform noise,
/// rescaled so its largest magnitude equals the amplitude.
pub fn texture_field(width: usize, height: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(derive_seed(seed, TAG_TEXTURE));
    let centre = 128.0;
    let raw = GrayFrame::from_fn(width, height, 0, |_, _| centre + rng.random_range(-100.0..100.0));
    let blurred = gaussian_blur(&raw, 3, 1.5).expect("valid blur parameters");
    let mut field: Vec<f64> = blurred.intensities().iter().map(|v| v - centre).collect();
    let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        field.iter_mut().for_each(|v| *v *= TEXTURE_AMPLITUDE / peak);
    }
    field
}

/// Renders one frame per truth frame: background + static texture + one
/// Gaussian blob per landmark, clamped to [0, 255].
pub fn render_frames(
    truth: &[LandmarkFrame],
    width: usize,
    height: usize,
    blob_sigma: f64,
    seed: u64,
) -> Result<Vec<GrayFrame>, SynthError> {
    if width == 0 || height == 0 || !(blob_sigma > 0.0) {
        return Err(SynthError::InvalidConfig("render needs a non-empty frame and blob_sigma > 0".into()));
    }
    let margin = 3.0 * blob_sigma;
    for f in truth {
        for (i, p) in f.points.iter().enumerate() {
            let inside = p[0] >= margin
                && p[1] >= margin
                && p[0] <= width as f64 - margin
                && p[1] <= height as f64 - margin;
            if !inside {
                return Err(SynthError::OutOfBounds {
                    frame: f.frame_index,
                    landmark: i,
                    x: p[0],
                    y: p[1],
                });
            }
        }
    }
    let texture = texture_field(width, height, seed);
    let cutoff = 6.0 * blob_sigma;
    let inv = 1.0 / (2.0 * blob_sigma * blob_sigma);
    let frames = truth
        .iter()
        .map(|f| {
            let mut acc: Vec<f64> = texture.iter().map(|t| BACKGROUND_LEVEL + t).collect();
            for p in &f.points {
                let x0 = (p[0] - cutoff).floor().max(0.0) as usize;
                let x1 = ((p[0] + cutoff).ceil() as usize).min(width - 1);
                let y0 = (p[1] - cutoff).floor().max(0.0) as usize;
                let y1 = ((p[1] + cutoff).ceil() as usize).min(height - 1);
                for y in y0..=y1 {
                    let dy = y as f64 - p[1];
                    for x in x0..=x1 {
                        let dx = x as f64 - p[0];
                        let r2 = dx * dx + dy * dy;
                        if r2 <= cutoff * cutoff {
                            acc[y * width + x] += BLOB_PEAK * (-r2 * inv).exp();
                        }
                    }
                }
            }
            acc.iter_mut().for_each(|v| *v = v.clamp(0.0, 255.0));
            GrayFrame::new(width, height, acc, f.frame_index).expect("clamped intensities")
        })
        .collect();
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub ground_truth: Vec<LandmarkFrame>,
    pub noisy_detections: Vec<LandmarkFrame>,
    pub outliers: Vec<Vec<bool>>,
    /// Empty when the dataset was generated without rendering.
    pub frames: Vec<GrayFrame>,
    pub label: Option<f64>,
    pub config: TrajectoryConfig,
}

/// Truth, noise and (optionally) rendered frames for one config.
pub fn gen_sample(cfg: &TrajectoryConfig, render: bool) -> Result<SynthSample, SynthError> {
    let truth = gen_trajectory(cfg)?;
    let noisy = add_detection_noise(&truth, cfg)?;
    let frames = if render {
        render_frames(&truth, cfg.width, cfg.height, cfg.blob_sigma, cfg.seed)?
    } else {
        Vec::new()
    };
    Ok(SynthSample {
        ground_truth: truth,
        noisy_detections: noisy.frames,
        outliers: noisy.outliers,
        frames,
        label: None,
        config: cfg.clone(),
    })
}

/// Severity label: affine in smoothness, 0.1 ↦ 0 and 1.0 ↦ 63.
pub fn label_for_smoothness(smoothness: f64) -> f64 {
    MAX_LABEL * (smoothness - MIN_SMOOTHNESS) / (MAX_SMOOTHNESS - MIN_SMOOTHNESS)
}

pub fn sample_seed(dataset_seed: u64, index: usize) -> u64 {
    derive_seed(derive_seed(dataset_seed, TAG_SAMPLE), index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub n_samples: usize,
    pub smoothness_min: f64,
    pub smoothness_max: f64,
    /// Template for every sample; `motion_smoothness` and `seed` are overridden.
    pub trajectory: TrajectoryConfig,
    pub render: bool,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            smoothness_min: MIN_SMOOTHNESS,
            smoothness_max: MAX_SMOOTHNESS,
            trajectory: TrajectoryConfig {
                num_frames: 33,
                burn_in: 50,
                motion_amplitude: 2.0,
                jitter_sigma: 0.1,
                ..TrajectoryConfig::default()
            },
            render: false,
        }
    }
}

/// Per-sample config of a regression dataset.
pub fn regression_sample_config(cfg: &RegressionConfig, seed: u64, index: usize) -> TrajectoryConfig {
    let s_seed = sample_seed(seed, index);
    let mut rng = seeded(derive_seed(s_seed, TAG_SMOOTHNESS));
    let smoothness = if cfg.smoothness_max > cfg.smoothness_min {
        rng.random_range(cfg.smoothness_min..=cfg.smoothness_max)
    } else {
        cfg.smoothness_min
    };
    TrajectoryConfig {
        motion_smoothness: smoothness,
        seed: s_seed,
        ..cfg.trajectory.clone()
    }
}

/// Labelled samples with smoothness drawn uniformly per sample.
pub fn gen_regression_dataset(cfg: &RegressionConfig, seed: u64) -> Result<Vec<SynthSample>, SynthError> {
    if cfg.n_samples < 2 {
        return Err(SynthError::InvalidConfig("n_samples must be at least 2".into()));
    }
    let lo_ok = cfg.smoothness_min > 0.0 && cfg.smoothness_min <= cfg.smoothness_max;
    if !lo_ok || cfg.smoothness_max > 1.0 {
        return Err(SynthError::InvalidConfig("smoothness range must lie in (0, 1]".into()));
    }
    (0..cfg.n_samples)
        .map(|i| {
            let tc = regression_sample_config(cfg, seed, i);
            let mut sample = gen_sample(&tc, cfg.render)?;
            sample.label = Some(label_for_smoothness(tc.motion_smoothness));
            Ok(sample)
        })
        .collect()
}

/// 256×256, 300 frames, σ = 2 px jitter, 5% outliers at 10 px.
pub fn calibration_bench_preset(seed: u64) -> TrajectoryConfig {
    TrajectoryConfig {
        num_frames: 300,
        motion_amplitude: 3.0,
        motion_smoothness: 0.8,
        jitter_sigma: 2.0,
        outlier_rate: 0.05,
        outlier_magnitude: 10.0,
        seed,
        ..TrajectoryConfig::default()
    }
}

pub fn regression_dataset_preset() -> RegressionConfig {
    RegressionConfig::default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(seed: u64) -> TrajectoryConfig {
        TrajectoryConfig {
            num_frames: 20,
            seed,
            ..TrajectoryConfig::default()
        }
    }

    fn mean_displacement(frames: &[LandmarkFrame]) -> f64 {
        let mut total = 0.0;
        let mut n = 0;
        for w in frames.windows(2) {
            for (a, b) in w[0].points.iter().zip(&w[1].points) {
                total += (b[0] - a[0]).hypot(b[1] - a[1]);
                n += 1;
            }
        }
        total / n as f64
    }

    #[test]
    fn zero_amplitude_is_static() {
        let cfg = TrajectoryConfig {
            motion_amplitude: 0.0,
            ..small(3)
        };
        let base = cfg.layout();
        for f in gen_trajectory(&cfg).unwrap() {
            assert_eq!(f.points, base);
        }
    }

    #[test]
    fn trajectories_are_seeded() {
        let a = gen_trajectory(&small(5)).unwrap();
        assert_eq!(a, gen_trajectory(&small(5)).unwrap());
        assert_ne!(a, gen_trajectory(&small(6)).unwrap());
    }

    #[test]
    fn smoother_walks_move_less() {
        let rough = TrajectoryConfig {
            motion_smoothness: 0.1,
            num_frames: 200,
            ..small(9)
        };
        let smooth = TrajectoryConfig {
            motion_smoothness: 0.99,
            ..rough.clone()
        };
        let r = mean_displacement(&gen_trajectory(&rough).unwrap());
        let s = mean_displacement(&gen_trajectory(&smooth).unwrap());
        assert!(s < r, "smooth {s} vs rough {r}");
    }

    #[test]
    fn noise_free_detections_equal_truth() {
        let cfg = small(1);
        let truth = gen_trajectory(&cfg).unwrap();
        let noisy = add_detection_noise(&truth, &cfg).unwrap();
        assert_eq!(noisy.frames, truth);
        assert_eq!(noisy.outlier_count(), 0);
    }

    #[test]
    fn all_outliers_sit_at_the_magnitude() {
        let cfg = TrajectoryConfig {
            outlier_rate: 1.0,
            jitter_sigma: 2.0,
            ..small(2)
        };
        let truth = gen_trajectory(&cfg).unwrap();
        let noisy = add_detection_noise(&truth, &cfg).unwrap();
        for (t, n) in truth.iter().zip(&noisy.frames) {
            for (a, b) in t.points.iter().zip(&n.points) {
                assert!(((b[0] - a[0]).hypot(b[1] - a[1]) - 10.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jitter_statistics() {
        let cfg = TrajectoryConfig {
            num_frames: 100,
            jitter_sigma: 2.0,
            ..small(4)
        };
        let truth = gen_trajectory(&cfg).unwrap();
        let noisy = add_detection_noise(&truth, &cfg).unwrap();
        for axis in 0..2 {
            let d: Vec<f64> = truth
                .iter()
                .zip(&noisy.frames)
                .flat_map(|(t, n)| t.points.iter().zip(&n.points).map(move |(a, b)| b[axis] - a[axis]))
                .collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
            assert!((var.sqrt() - 2.0).abs() < 0.2, "axis {axis}: {}", var.sqrt());
        }
    }

    #[test]
    fn static_trajectory_renders_identical_frames() {
        let cfg = TrajectoryConfig {
            motion_amplitude: 0.0,
            num_frames: 3,
            width: 96,
            height: 96,
            ..small(0)
        };
        let frames = render_frames(&gen_trajectory(&cfg).unwrap(), 96, 96, 2.5, 0).unwrap();
        assert_eq!(frames[0].intensities(), frames[2].intensities());
        assert!(frames[0].intensities().iter().all(|v| (0.0..=255.0).contains(v)));
    }

    #[test]
    fn rendered_shift_moves_blob_content() {
        // Flat background (no texture) isolates the blob term.
        let p = [[30.0, 30.0]];
        let q = [[33.0, 30.0]];
        let truth = vec![
            LandmarkFrame::new(0, p.to_vec(), LandmarkSource::Detected),
            LandmarkFrame::new(1, q.to_vec(), LandmarkSource::Detected),
        ];
        let f = render_frames(&truth, 64, 64, 2.5, 11).unwrap();
        let tex = texture_field(64, 64, 11);
        for y in 24..37 {
            for x in 22..36 {
                let a = f[0].get(x, y) - tex[y * 64 + x];
                let b = f[1].get(x + 3, y) - tex[y * 64 + x + 3];
                if f[0].get(x, y) < 255.0 && f[1].get(x + 3, y) < 255.0 {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn blob_centres_keep_brightness() {
        let cfg = TrajectoryConfig {
            num_frames: 10,
            ..small(8)
        };
        // Pixel-centred points: the blob peak lands on a sample.
        let mut truth = gen_trajectory(&cfg).unwrap();
        for f in truth.iter_mut() {
            f.points.iter_mut().for_each(|p| *p = [p[0].round(), p[1].round()]);
        }
        let frames = render_frames(&truth, 256, 256, 2.5, 8).unwrap();
        for (t, f) in truth.iter().zip(&frames).skip(1) {
            for (p, q) in t.points.iter().zip(&truth[0].points) {
                let now = f.get(p[0] as usize, p[1] as usize);
                let then = frames[0].get(q[0] as usize, q[1] as usize);
                assert!((now - then).abs() <= 1.0 + 1e-9, "{now} vs {then}");
            }
        }
    }

    #[test]
    fn texture_is_bounded_and_seeded() {
        let t = texture_field(40, 30, 5);
        let peak = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - TEXTURE_AMPLITUDE).abs() < 1e-9);
        assert_eq!(t, texture_field(40, 30, 5));
    }

    #[test]
    fn border_points_are_rejected() {
        let truth = vec![LandmarkFrame::new(4, vec![[10.0, 10.0], [2.0, 20.0]], LandmarkSource::Detected)];
        assert_eq!(
            render_frames(&truth, 64, 64, 2.5, 0).unwrap_err(),
            SynthError::OutOfBounds {
                frame: 4,
                landmark: 1,
                x: 2.0,
                y: 20.0
            }
        );
    }

    #[test]
    fn labels_follow_smoothness() {
        assert_eq!(label_for_smoothness(0.1), 0.0);
        assert!((label_for_smoothness(1.0) - 63.0).abs() < 1e-12);
        let cfg = RegressionConfig {
            n_samples: 200,
            trajectory: TrajectoryConfig {
                num_frames: 2,
                ..RegressionConfig::default().trajectory
            },
            ..RegressionConfig::default()
        };
        let data = gen_regression_dataset(&cfg, 17).unwrap();
        let labels: Vec<f64> = data.iter().map(|s| s.label.unwrap()).collect();
        let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - lo) / 63.0 >= 0.8);
        assert!(labels.iter().all(|l| (0.0..=63.0).contains(l)));
        assert_eq!(data, gen_regression_dataset(&cfg, 17).unwrap());
        assert!(gen_regression_dataset(&RegressionConfig { n_samples: 1, ..cfg }, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrajectoryConfig { num_frames: 1, ..small(0) }.validate().is_err());
        assert!(TrajectoryConfig { motion_smoothness: 0.0, ..small(0) }.validate().is_err());
        assert!(TrajectoryConfig { outlier_rate: 1.5, ..small(0) }.validate().is_err());
        assert!(TrajectoryConfig { jitter_sigma: -1.0, ..small(0) }.validate().is_err());
        assert!(TrajectoryConfig { num_landmarks: 70, ..small(0) }.validate().is_err());
        let json = r#"{"num_frames": 5, "jitter": 2}"#;
        assert!(serde_json::from_str::<TrajectoryConfig>(json).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn outlier_bookkeeping_is_exact(
            seed in any::<u64>(),
            rate in 0.0f64..1.0,
            magnitude in 1.0f64..30.0,
            jitter_frac in 0.0f64..0.1,
        ) {
            let cfg = TrajectoryConfig {
                num_frames: 5,
                outlier_rate: rate,
                outlier_magnitude: magnitude,
                jitter_sigma: jitter_frac * magnitude,
                ..small(seed)
            };
            let truth = gen_trajectory(&cfg).unwrap();
            let noisy = add_detection_noise(&truth, &cfg).unwrap();
            let threshold = magnitude - 3.0 * cfg.jitter_sigma;
            for ((t, n), flags) in truth.iter().zip(&noisy.frames).zip(&noisy.outliers) {
                for ((a, b), &flag) in t.points.iter().zip(&n.points).zip(flags) {
                    let dist = (b[0] - a[0]).hypot(b[1] - a[1]);
                    prop_assert_eq!(flag, dist >= threshold - 1e-9);
                }
            }
        }
    }
}
