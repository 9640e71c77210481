//! Sparse Lucas-Kanade optical flow.
//!
//! [`lk_point_flow`] solves the 2×2 normal equations of the brightness
//! constancy constraint over an `n × n` window, iterating Newton steps that
//! re-sample the next frame at the warped position. [`pyramidal_flow`] runs it
//! coarse to fine; [`forward_backward_check`] validates a track by flowing it
//! forward then backward and measuring the round-trip displacement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{GrayFrame, ImagePyramid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("normal matrix is singular (min eigenvalue per pixel {min_eigen:.3e})")]
    SingularSystem { min_eigen: f64 },
    #[error("frames or pyramids do not match: {0}")]
    Mismatch(String),
    #[error("point ({x}, {y}) lies outside the {width}x{height} frame")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowVector {
    pub u: f64,
    pub v: f64,
}

impl FlowVector {
    pub const ZERO: FlowVector = FlowVector { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn norm(&self) -> f64 {
        self.u.hypot(self.v)
    }

    fn scaled(self, s: f64) -> Self {
        Self::new(self.u * s, self.v * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Side of the square LK window; odd.
    pub window_n: usize,
    pub num_levels: usize,
    pub scale_factor: f64,
    /// Newton iterations per pyramid level.
    pub max_iterations: usize,
    /// Stop iterating once an update is shorter than this (pixels).
    pub convergence_eps: f64,
    /// Minimum eigenvalue of the normal matrix divided by window pixel count.
    pub min_eigen: f64,
    /// Forward-backward round-trip tolerance (pixels).
    pub fb_threshold_tau: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            window_n: 15,
            num_levels: 3,
            scale_factor: 0.5,
            max_iterations: 10,
            convergence_eps: 0.01,
            min_eigen: 1e-4,
            fb_threshold_tau: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.window_n < 3 || self.window_n % 2 == 0 {
            return Err(FlowError::InvalidConfig("window_n must be odd and >= 3"));
        }
        if self.num_levels < 1 || self.max_iterations < 1 {
            return Err(FlowError::InvalidConfig(
                "num_levels and max_iterations must be >= 1",
            ));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return Err(FlowError::InvalidConfig("scale_factor must be in (0, 1)"));
        }
        if !(self.convergence_eps > 0.0 && self.min_eigen > 0.0 && self.fb_threshold_tau > 0.0)
        {
            return Err(FlowError::InvalidConfig("thresholds must be strictly positive"));
        }
        Ok(())
    }
}

/// Forward flow plus its round-trip verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedFlow {
    pub flow: FlowVector,
    pub valid: bool,
    /// `+inf` when either directional solve failed.
    pub fb_error: f64,
}

impl ValidatedFlow {
    pub fn rejected() -> Self {
        Self {
            flow: FlowVector::ZERO,
            valid: false,
            fb_error: f64::INFINITY,
        }
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMatrix {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl NormalMatrix {
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        (mean - radius, mean + radius)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Closed-form inverse applied to `(bx, by)`.
    fn solve(&self, bx: f64, by: f64) -> (f64, f64) {
        let inv_det = 1.0 / self.det();
        (
            inv_det * (self.yy * bx - self.xy * by),
            inv_det * (self.xx * by - self.xy * bx),
        )
    }
}

/// Template patch sampled from the previous frame around the tracked point.
struct Patch {
    offsets: Vec<(f64, f64)>,
    values: Vec<f64>,
    ix: Vec<f64>,
    iy: Vec<f64>,
    normal: NormalMatrix,
}

impl Patch {
    fn sample(prev: &GrayFrame, px: f64, py: f64, window_n: usize) -> Self {
        let half = (window_n / 2) as isize;
        let count = window_n * window_n;
        let mut patch = Patch {
            offsets: Vec::with_capacity(count),
            values: Vec::with_capacity(count),
            ix: Vec::with_capacity(count),
            iy: Vec::with_capacity(count),
            normal: NormalMatrix {
                xx: 0.0,
                xy: 0.0,
                yy: 0.0,
            },
        };
        for dy in -half..=half {
            for dx in -half..=half {
                let (x, y) = (px + dx as f64, py + dy as f64);
                // Central difference of bilinear samples equals the bilinear
                // interpolation of the central-difference gradient grid.
                let gx = 0.5 * (prev.sample_bilinear(x + 1.0, y) - prev.sample_bilinear(x - 1.0, y));
                let gy = 0.5 * (prev.sample_bilinear(x, y + 1.0) - prev.sample_bilinear(x, y - 1.0));
                patch.offsets.push((dx as f64, dy as f64));
                patch.values.push(prev.sample_bilinear(x, y));
                patch.ix.push(gx);
                patch.iy.push(gy);
                patch.normal.xx += gx * gx;
                patch.normal.xy += gx * gy;
                patch.normal.yy += gy * gy;
            }
        }
        patch
    }

    fn check_conditioning(&self, min_eigen: f64) -> Result<(), FlowError> {
        let n = &self.normal;
        let (lo, hi) = n.eigenvalues();
        debug_assert!(hi >= 0.0 && lo >= -1e-9 * hi.max(1.0), "normal matrix not PSD");
        let per_pixel = lo / self.values.len() as f64;
        if !(per_pixel >= min_eigen) || !(n.det() > 0.0) {
            return Err(FlowError::SingularSystem {
                min_eigen: per_pixel,
            });
        }
        Ok(())
    }

    /// Right-hand side `(-Σ ix·it, -Σ iy·it)` at the current flow estimate.
    fn rhs(&self, next: &GrayFrame, px: f64, py: f64, flow: FlowVector) -> (f64, f64) {
        let (mut bx, mut by) = (0.0, 0.0);
        for i in 0..self.values.len() {
            let (dx, dy) = self.offsets[i];
            let it = next.sample_bilinear(px + dx + flow.u, py + dy + flow.v) - self.values[i];
            bx -= self.ix[i] * it;
            by -= self.iy[i] * it;
        }
        (bx, by)
    }

    /// Mean absolute brightness-constancy residual `|ix·u + iy·v + it|`.
    fn mean_residual(&self, next: &GrayFrame, px: f64, py: f64, flow: FlowVector) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            let (dx, dy) = self.offsets[i];
            let it = next.sample_bilinear(px + dx, py + dy) - self.values[i];
            acc += (self.ix[i] * flow.u + self.iy[i] * flow.v + it).abs();
        }
        acc / self.values.len() as f64
    }
}

fn check_point(frame: &GrayFrame, x: f64, y: f64) -> Result<(), FlowError> {
    let inside = x.is_finite()
        && y.is_finite()
        && x >= 0.0
        && y >= 0.0
        && x <= (frame.width() - 1) as f64
        && y <= (frame.height() - 1) as f64;
    if inside {
        Ok(())
    } else {
        Err(FlowError::OutOfBounds {
            x,
            y,
            width: frame.width(),
            height: frame.height(),
        })
    }
}

/// Iterative single-level Lucas-Kanade at `point`, starting from `initial_guess`.
pub fn lk_point_flow(
    prev: &GrayFrame,
    next: &GrayFrame,
    point: (f64, f64),
    initial_guess: FlowVector,
    cfg: &FlowConfig,
) -> Result<FlowVector, FlowError> {
    prev.same_shape(next)
        .map_err(|e| FlowError::Mismatch(e.to_string()))?;
    let (px, py) = point;
    check_point(prev, px, py)?;

    let patch = Patch::sample(prev, px, py, cfg.window_n);
    patch.check_conditioning(cfg.min_eigen)?;

    let mut flow = initial_guess;
    for _ in 0..cfg.max_iterations {
        let (bx, by) = patch.rhs(next, px, py, flow);
        let (du, dv) = patch.normal.solve(bx, by);
        flow.u += du;
        flow.v += dv;
        if du.hypot(dv) < cfg.convergence_eps {
            break;
        }
    }
    Ok(flow)
}

/// Brightness-constancy residual diagnostics for one LK solve: mean
/// `|ix·u + iy·v + it|` over the window at zero flow and at `flow`, using the
/// single-shot linearization around the point.
pub fn linearized_residuals(
    prev: &GrayFrame,
    next: &GrayFrame,
    point: (f64, f64),
    flow: FlowVector,
    window_n: usize,
) -> (f64, f64) {
    let patch = Patch::sample(prev, point.0, point.1, window_n);
    (
        patch.mean_residual(next, point.0, point.1, FlowVector::ZERO),
        patch.mean_residual(next, point.0, point.1, flow),
    )
}

/// The normal matrix the solver would build at `point`.
pub fn normal_matrix(prev: &GrayFrame, point: (f64, f64), window_n: usize) -> NormalMatrix {
    Patch::sample(prev, point.0, point.1, window_n).normal
}

/// Coarse-to-fine flow of a level-0 point.
pub fn pyramidal_flow(
    prev_pyr: &ImagePyramid,
    next_pyr: &ImagePyramid,
    point: (f64, f64),
    cfg: &FlowConfig,
) -> Result<FlowVector, FlowError> {
    let levels = prev_pyr.num_levels();
    if levels != next_pyr.num_levels() || prev_pyr.scale_factor != next_pyr.scale_factor {
        return Err(FlowError::Mismatch(format!(
            "pyramids differ: {} vs {} levels",
            levels,
            next_pyr.num_levels()
        )));
    }
    if levels == 0 {
        return Err(FlowError::Mismatch("empty pyramid".into()));
    }
    check_point(&prev_pyr.levels[0], point.0, point.1)?;

    let mut guess = FlowVector::ZERO;
    let mut last_err = None;
    let mut any_ok = false;
    for level in (0..levels).rev() {
        let scaled = prev_pyr.to_level(level, point.0, point.1);
        match lk_point_flow(
            &prev_pyr.levels[level],
            &next_pyr.levels[level],
            scaled,
            guess,
            cfg,
        ) {
            Ok(f) => {
                guess = f;
                any_ok = true;
            }
            // Untextured coarse levels carry the current guess down.
            Err(e @ FlowError::SingularSystem { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        if level > 0 {
            guess = guess.scaled(1.0 / prev_pyr.scale_factor);
        }
    }
    match (any_ok, last_err) {
        (true, _) => Ok(guess),
        (false, Some(e)) => Err(e),
        (false, None) => unreachable!("at least one level ran"),
    }
}

/// Forward flow at `point` with a round-trip consistency verdict. Never
/// fails: unsolvable systems yield an invalid result with `fb_error = inf`.
pub fn forward_backward_check(
    prev_pyr: &ImagePyramid,
    next_pyr: &ImagePyramid,
    point: (f64, f64),
    cfg: &FlowConfig,
) -> ValidatedFlow {
    let forward = match pyramidal_flow(prev_pyr, next_pyr, point, cfg) {
        Ok(f) => f,
        Err(_) => return ValidatedFlow::rejected(),
    };
    let landed = (point.0 + forward.u, point.1 + forward.v);
    let backward = match pyramidal_flow(next_pyr, prev_pyr, landed, cfg) {
        Ok(b) => b,
        Err(_) => {
            return ValidatedFlow {
                flow: forward,
                valid: false,
                fb_error: f64::INFINITY,
            }
        }
    };
    let fb_error = (forward.u + backward.u).hypot(forward.v + backward.v);
    ValidatedFlow {
        flow: forward,
        valid: fb_error <= cfg.fb_threshold_tau,
        fb_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::build_pyramid;

    fn textured(w: usize, h: usize, shift: (f64, f64)) -> GrayFrame {
        GrayFrame::from_fn(w, h, 0, |x, y| {
            let (x, y) = (x as f64 - shift.0, y as f64 - shift.1);
            128.0 + 40.0 * (0.35 * x).sin() * (0.27 * y).cos() + 30.0 * (0.21 * x + 0.17 * y).sin()
        })
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = textured(48, 48, (0.0, 0.0));
        let flow = lk_point_flow(&f, &f, (24.0, 24.0), FlowVector::ZERO, &FlowConfig::default())
            .unwrap();
        assert!(flow.u.abs() < 1e-9 && flow.v.abs() < 1e-9);
    }

    #[test]
    fn constant_frames_are_singular() {
        let f = GrayFrame::constant(32, 32, 90.0);
        let r = lk_point_flow(&f, &f, (16.0, 16.0), FlowVector::ZERO, &FlowConfig::default());
        assert!(matches!(r, Err(FlowError::SingularSystem { .. })));
        let p = build_pyramid(&f, 2, 0.5).unwrap();
        assert!(matches!(
            pyramidal_flow(&p, &p, (16.0, 16.0), &FlowConfig::default()),
            Err(FlowError::SingularSystem { .. })
        ));
        let fb = forward_backward_check(&p, &p, (16.0, 16.0), &FlowConfig::default());
        assert!(!fb.valid && fb.fb_error.is_infinite());
    }

    #[test]
    fn recovers_smooth_texture_shift() {
        let a = textured(64, 64, (0.0, 0.0));
        let b = textured(64, 64, (1.3, -0.6));
        let flow = lk_point_flow(&a, &b, (32.0, 32.0), FlowVector::ZERO, &FlowConfig::default())
            .unwrap();
        assert!((flow.u - 1.3).abs() < 0.05, "{flow:?}");
        assert!((flow.v + 0.6).abs() < 0.05, "{flow:?}");
    }

    #[test]
    fn out_of_bounds_point() {
        let f = textured(20, 20, (0.0, 0.0));
        let r = lk_point_flow(&f, &f, (25.0, 3.0), FlowVector::ZERO, &FlowConfig::default());
        assert!(matches!(r, Err(FlowError::OutOfBounds { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let even = FlowConfig {
            window_n: 14,
            ..FlowConfig::default()
        };
        assert!(even.validate().is_err());
        let zero_tau = FlowConfig {
            fb_threshold_tau: 0.0,
            ..FlowConfig::default()
        };
        assert!(zero_tau.validate().is_err());
    }

    #[test]
    fn single_level_pyramid_matches_plain_lk() {
        let a = textured(64, 64, (0.0, 0.0));
        let b = textured(64, 64, (0.8, 0.4));
        let cfg = FlowConfig {
            num_levels: 1,
            ..FlowConfig::default()
        };
        let pa = build_pyramid(&a, 1, 0.5).unwrap();
        let pb = build_pyramid(&b, 1, 0.5).unwrap();
        let pyr = pyramidal_flow(&pa, &pb, (30.5, 33.25), &cfg).unwrap();
        let lk = lk_point_flow(&a, &b, (30.5, 33.25), FlowVector::ZERO, &cfg).unwrap();
        assert_eq!(pyr.u.to_bits(), lk.u.to_bits());
        assert_eq!(pyr.v.to_bits(), lk.v.to_bits());
    }

    #[test]
    fn normal_matrix_symmetric_psd() {
        let f = textured(40, 40, (0.0, 0.0));
        for &(x, y) in &[(5.0, 5.0), (20.3, 17.9), (39.0, 0.0)] {
            let n = normal_matrix(&f, (x, y), 15);
            let (lo, hi) = n.eigenvalues();
            assert!(lo >= -1e-9 && hi >= lo);
            assert!(n.det() >= -1e-6 * hi * hi);
        }
    }
}
