//! Landmark-track calibration and temporal severity regression.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`imaging`] – grayscale frames, Gaussian pyramids, gradients, sub-pixel sampling.
//! 2. [`flow`] – sparse pyramidal Lucas-Kanade with a forward-backward validity check.
//! 3. [`calibration`] – per-landmark Kalman tracks fusing validated flow with detections.
//! 4. [`features`] – similarity alignment and the absolute / differential feature streams.
//! 5. [`neural`] – GRU cells, the bidirectional regressor, BPTT, smooth-L1 and Adam.
//! 6. [`pipeline`] – dual-stream training, averaged inference, RMSE / MAE.
//!
//! [`synth`] generates ground-truth trajectories, rendered frames and labelled
//! regression datasets; [`formats`] holds the on-disk formats (PGM, CSV,
//! manifests) and [`config`] the strict run configuration.

pub mod calibration;
pub mod config;
pub mod features;
pub mod flow;
pub mod formats;
pub mod imaging;
pub mod neural;
pub mod pipeline;
pub mod synth;

mod rng;

pub use rng::derive_seed;

pub use calibration::{
    calibrate_sequence, CalibrationReport, KalmanConfig, KalmanTrack, LandmarkFrame,
    LandmarkSource, Point2,
};
pub use features::{AlignmentMode, AlignmentTemplate, FeatureSequence, StreamKind};
pub use flow::{FlowConfig, FlowVector, ValidatedFlow};
pub use imaging::{GrayFrame, ImagePyramid};
pub use neural::{AdamState, BiGruRegressor, GruParams};
pub use pipeline::{DualStreamModel, EvalResult, TrainConfig};

/// Number of landmarks in the standard 68-point facial layout.
pub const NUM_LANDMARKS: usize = 68;
