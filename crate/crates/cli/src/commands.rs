use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use facemotion::calibration::{calibrate_sequence, CalibrationError, LandmarkSource};
use facemotion::config::{ConfigError, RunConfig};
use facemotion::features::{absolute_features, differential_features, AlignmentMode, AlignmentTemplate, FeatureError, FeatureSequence};
use facemotion::formats::{
    read_feature_csv, read_frame_dir, read_landmarks_csv, read_value_csv, write_evaluation_report,
    write_feature_csv, write_landmarks_csv, write_loss_log, write_pgm, write_value_csv, FormatError,
    Manifest, ManifestEntry, MANIFEST_VERSION,
};
use facemotion::pipeline::{evaluate as score, train as fit, DualStreamModel, PipelineError, TrainingSample};
use facemotion::synth::{
    calibration_bench_preset, gen_regression_dataset, gen_sample, regression_dataset_preset, SynthError,
};
use thiserror::Error;

use crate::{Alignment, Preset};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::InvalidConfig(_) => CliError::Input(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidConfig(_)
            | PipelineError::UnsupportedVersion(_)
            | PipelineError::Malformed(_) => CliError::Input(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => CliError::Input(e.to_string()),
            SynthError::OutOfBounds { .. } => CliError::Compute(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

/// Flag value, else the config's, else an input error naming the flag.
fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| CliError::Input(format!("--{name} is required (flag or io.{name} in the config)")))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn calibrate(
    frames: Option<PathBuf>,
    landmarks: Option<PathBuf>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    config: Option<PathBuf>,
) -> CliResult {
    let cfg = RunConfig::load_optional(config.as_deref())?;
    let frames = required(frames, &cfg.io.frames, "frames")?;
    let landmarks = required(landmarks, &cfg.io.landmarks, "landmarks")?;
    let out = required(out, &cfg.io.out, "out")?;

    let images = read_frame_dir(&frames)?;
    let detections = read_landmarks_csv(&landmarks, LandmarkSource::Detected)?;
    let (calibrated, rep) = calibrate_sequence(&images, &detections, &cfg.flow, &cfg.kalman)?;
    write_landmarks_csv(&out, &calibrated)?;
    if let Some(path) = report {
        std::fs::write(&path, rep.to_text()).map_err(|source| FormatError::Io { path: path.clone(), source })?;
        write_json(&with_suffix(&path, ".json"), &rep.summary())?;
    }
    eprintln!(
        "calibrated {} frames x {} landmarks, {} flow predictions rejected",
        rep.frames,
        rep.landmarks,
        rep.rejected_flow_count()
    );
    Ok(())
}

pub fn features(
    landmarks: Option<PathBuf>,
    out_a: PathBuf,
    out_b: PathBuf,
    label: Option<f64>,
    alignment: Option<Alignment>,
    config: Option<PathBuf>,
) -> CliResult {
    let cfg = RunConfig::load_optional(config.as_deref())?;
    let landmarks = required(landmarks, &cfg.io.landmarks, "landmarks")?;
    let mode = match alignment {
        Some(Alignment::Similarity) => AlignmentMode::Similarity,
        Some(Alignment::Affine) => AlignmentMode::Affine,
        None => cfg.features.alignment,
    };
    let frames = read_landmarks_csv(&landmarks, LandmarkSource::Calibrated)?;
    let mut a = absolute_features(&frames, &AlignmentTemplate::canonical(), mode)?;
    a.label = label;
    let b = differential_features(&a)?;
    write_feature_csv(&out_a, &a)?;
    write_feature_csv(&out_b, &b)?;
    Ok(())
}

fn load_streams(manifest: &Path, entry: &ManifestEntry) -> Result<(FeatureSequence, FeatureSequence), CliError> {
    Ok((
        read_feature_csv(&Manifest::resolve(manifest, entry, "a")?)?,
        read_feature_csv(&Manifest::resolve(manifest, entry, "b")?)?,
    ))
}

fn load_sample(manifest: &Path, entry: &ManifestEntry) -> Result<TrainingSample, CliError> {
    let (absolute, differential) = load_streams(manifest, entry)?;
    let label = entry.label.or(absolute.label).ok_or_else(|| {
        CliError::Input(format!("{}: sample '{}' has no label", manifest.display(), entry.sample_id))
    })?;
    Ok(TrainingSample {
        absolute,
        differential,
        label,
    })
}

/// Entries of `split`; every entry when none carries a split at all.
fn split_entries<'m>(m: &'m Manifest, split: &str) -> Vec<&'m ManifestEntry> {
    if m.samples.iter().all(|e| e.split.is_none()) {
        return m.samples.iter().collect();
    }
    m.samples.iter().filter(|e| e.split.as_deref() == Some(split)).collect()
}

pub fn train(
    manifest: Option<PathBuf>,
    model_out: PathBuf,
    log_out: PathBuf,
    epochs: Option<usize>,
    seed: Option<u64>,
    config: Option<PathBuf>,
) -> CliResult {
    let cfg = RunConfig::load_optional(config.as_deref())?;
    let manifest = required(manifest, &cfg.io.manifest, "manifest")?;
    let mut tc = cfg.train_config();
    if let Some(e) = epochs {
        tc.epochs = e;
    }
    if let Some(s) = seed {
        tc.seed = s;
    }
    let m = Manifest::read(&manifest)?;
    let samples = split_entries(&m, "train")
        .into_iter()
        .map(|e| load_sample(&manifest, e))
        .collect::<Result<Vec<_>, _>>()?;
    let outcome = fit(&samples, &tc)?;
    let mut text = outcome.model.to_json()?;
    text.push('\n');
    std::fs::write(&model_out, text).map_err(|source| FormatError::Io { path: model_out.clone(), source })?;
    write_loss_log(&log_out, &outcome.loss_log)?;
    eprintln!("trained on {} samples for {} epochs", samples.len(), tc.epochs);
    Ok(())
}

fn load_model(path: &Path) -> Result<DualStreamModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    DualStreamModel::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn predict(
    model: Option<PathBuf>,
    single: Option<(PathBuf, PathBuf)>,
    manifest: Option<PathBuf>,
    split: String,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
) -> CliResult {
    let cfg = RunConfig::load_optional(config.as_deref())?;
    let model = load_model(&required(model, &cfg.io.model, "model")?)?;
    if let Some((a, b)) = single {
        let p = model.predict(&read_feature_csv(&a)?, &read_feature_csv(&b)?)?;
        println!("{p}");
        return Ok(());
    }
    let manifest = required(manifest, &cfg.io.manifest, "manifest")?;
    let out = required(out, &cfg.io.out, "out")?;
    let m = Manifest::read(&manifest)?;
    let mut rows = Vec::new();
    for entry in split_entries(&m, &split) {
        let (a, b) = load_streams(&manifest, entry)?;
        rows.push((entry.sample_id.clone(), model.predict(&a, &b)?));
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no samples in split '{split}'", manifest.display())));
    }
    write_value_csv(&out, "prediction", &rows)?;
    Ok(())
}

pub fn evaluate(predictions: PathBuf, labels: PathBuf, report: Option<PathBuf>) -> CliResult {
    let preds = read_value_csv(&predictions)?;
    let truth: BTreeMap<String, f64> = read_value_csv(&labels)?.into_iter().collect();
    let mut ids = Vec::with_capacity(preds.len());
    let mut p = Vec::with_capacity(preds.len());
    let mut l = Vec::with_capacity(preds.len());
    for (id, v) in preds {
        let label = *truth.get(&id).ok_or_else(|| {
            CliError::Input(format!("{}: no label for sample '{id}'", labels.display()))
        })?;
        ids.push(id);
        p.push(v);
        l.push(label);
    }
    let r = score(&p, &l)?;
    if let Some(path) = report {
        write_evaluation_report(&path, &ids, &l, &p, &r)?;
    }
    println!("RMSE={} MAE={}", r.rmse, r.mae);
    Ok(())
}

pub fn synth(preset: Preset, out: Option<PathBuf>, seed: Option<u64>, config: Option<PathBuf>) -> CliResult {
    let cfg = RunConfig::load_optional(config.as_deref())?;
    let out = required(out, &cfg.io.out, "out")?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    create_dir(&out)?;
    match preset {
        Preset::CalibrationBench => synth_bench(&cfg, &out, seed),
        Preset::RegressionDataset => synth_regression(&cfg, &out, seed),
    }
}

fn synth_bench(cfg: &RunConfig, out: &Path, seed: u64) -> CliResult {
    let mut tc = cfg.synth.calibration_bench.clone().unwrap_or_else(|| calibration_bench_preset(seed));
    tc.seed = seed;
    let sample = gen_sample(&tc, true)?;
    let frames_dir = out.join("frames");
    create_dir(&frames_dir)?;
    for (i, f) in sample.frames.iter().enumerate() {
        write_pgm(&frames_dir.join(format!("frame_{i:04}.pgm")), f)?;
    }
    write_landmarks_csv(&out.join("truth.csv"), &sample.ground_truth)?;
    write_landmarks_csv(&out.join("detections.csv"), &sample.noisy_detections)?;
    let paths = [("frames", "frames"), ("truth", "truth.csv"), ("detections", "detections.csv")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        preset: "calibration-bench".into(),
        seed,
        generator: serde_json::to_value(&tc).expect("plain data serializes"),
        samples: vec![ManifestEntry {
            sample_id: "bench".into(),
            label: None,
            split: None,
            paths,
        }],
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

fn synth_regression(cfg: &RunConfig, out: &Path, seed: u64) -> CliResult {
    let rc = cfg.synth.regression_dataset.clone().unwrap_or_else(regression_dataset_preset);
    let data = gen_regression_dataset(&rc, seed)?;
    let template = AlignmentTemplate::canonical();
    // Last fifth is held out.
    let n_train = data.len() - data.len() / 5;
    let mut entries = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for (i, sample) in data.iter().enumerate() {
        let id = format!("s{i:03}");
        let rel = format!("samples/{id}");
        let dir = out.join(&rel);
        create_dir(&dir)?;
        let label = sample.label.expect("regression samples are labelled");
        write_landmarks_csv(&dir.join("truth.csv"), &sample.ground_truth)?;
        write_landmarks_csv(&dir.join("detections.csv"), &sample.noisy_detections)?;
        let mut a = absolute_features(&sample.noisy_detections, &template, cfg.features.alignment)?;
        a.label = Some(label);
        let b = differential_features(&a)?;
        write_feature_csv(&dir.join("a.csv"), &a)?;
        write_feature_csv(&dir.join("b.csv"), &b)?;
        let paths = ["truth.csv", "detections.csv", "a.csv", "b.csv"]
            .into_iter()
            .map(|f| (f.trim_end_matches(".csv").to_string(), format!("{rel}/{f}")))
            .collect();
        entries.push(ManifestEntry {
            sample_id: id.clone(),
            label: Some(label),
            split: Some(if i < n_train { "train" } else { "test" }.into()),
            paths,
        });
        labels.push((id, label));
    }
    write_value_csv(&out.join("labels.csv"), "label", &labels)?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        preset: "regression-dataset".into(),
        seed,
        generator: serde_json::json!({
            "regression": rc,
            "alignment": cfg.features.alignment,
        }),
        samples: entries,
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}
