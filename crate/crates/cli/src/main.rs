//! `facemotion` command-line front end.
//!
//! Exit status: 0 on success, 2 for unreadable or malformed input
//! (including config files), 3 when a computation step fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "facemotion", version, about = "Landmark calibration and motion-severity regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One long rendered sequence with jittered and outlier detections.
    CalibrationBench,
    /// Labelled landmark sequences with precomputed feature streams.
    RegressionDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Alignment {
    Similarity,
    Affine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refine detected landmarks against their frames.
    Calibrate {
        /// Directory of binary PGM frames, read in file-name order.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Detected landmarks CSV (frame,landmark,x,y).
        #[arg(long)]
        landmarks: Option<PathBuf>,
        /// Calibrated landmarks CSV to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Text report path; a JSON summary is written next to it as PATH.json.
        #[arg(long)]
        report: Option<PathBuf>,
        /// JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Derive the absolute and differential feature streams from landmarks.
    Features {
        /// Landmarks CSV (frame,landmark,x,y).
        #[arg(long)]
        landmarks: Option<PathBuf>,
        /// Absolute-stream CSV to write.
        #[arg(long)]
        out_a: PathBuf,
        /// Differential-stream CSV to write.
        #[arg(long)]
        out_b: PathBuf,
        /// Label stored in both feature files.
        #[arg(long)]
        label: Option<f64>,
        /// Alignment transform.
        #[arg(long, value_enum)]
        alignment: Option<Alignment>,
        /// JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the dual-stream regressor on a dataset manifest.
    Train {
        /// Dataset manifest; entries with split "train" are used (all entries if none carry a split).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Model JSON to write.
        #[arg(long)]
        model_out: PathBuf,
        /// Per-epoch loss CSV to write.
        #[arg(long)]
        log_out: PathBuf,
        /// Training epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Predict a severity score with a trained model.
    Predict {
        /// Model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Absolute-stream CSV of one sample.
        #[arg(long, requires = "b", conflicts_with = "manifest")]
        a: Option<PathBuf>,
        /// Differential-stream CSV of one sample.
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        /// Predict every manifest entry of --split instead of a single sample.
        #[arg(long, requires = "out")]
        manifest: Option<PathBuf>,
        /// Manifest split to predict.
        #[arg(long, default_value = "test")]
        split: String,
        /// Predictions CSV (sample_id,prediction) for manifest mode.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predictions against labels; prints RMSE and MAE.
    Evaluate {
        /// Predictions CSV (sample_id,prediction).
        #[arg(long)]
        predictions: PathBuf,
        /// Labels CSV (sample_id,label).
        #[arg(long)]
        labels: PathBuf,
        /// Per-sample residual report to write.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic dataset tree.
    Synth {
        /// Dataset kind.
        #[arg(long, value_enum)]
        preset: Preset,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate { frames, landmarks, out, report, config } => {
            commands::calibrate(frames, landmarks, out, report, config)
        }
        Command::Features { landmarks, out_a, out_b, label, alignment, config } => {
            commands::features(landmarks, out_a, out_b, label, alignment, config)
        }
        Command::Train { manifest, model_out, log_out, epochs, seed, config } => {
            commands::train(manifest, model_out, log_out, epochs, seed, config)
        }
        Command::Predict { model, a, b, manifest, split, out, config } => {
            commands::predict(model, a.zip(b), manifest, split, out, config)
        }
        Command::Evaluate { predictions, labels, report } => commands::evaluate(predictions, labels, report),
        Command::Synth { preset, out, seed, config } => commands::synth(preset, out, seed, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
