//! Dual-stream training and inference.
//!
//! One regressor reads the absolute stream, the other the differential
//! stream; the reported prediction is the mean of the two. By default each
//! stream is fitted against the label on its own; `joint_loss` puts the loss
//! on the averaged output instead.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::LandmarkFrame;
use crate::features::{
    absolute_features, differential_features, temporal_resample, AlignmentMode, AlignmentTemplate,
    FeatureError, FeatureSequence,
};
use crate::neural::{
    adam_step, backward, smooth_l1, smooth_l1_grad, AdamConfig, AdamState, BiGruRegressor,
    BiGruWeights, ForwardMode, NeuralError, Pooling, RegressorDocument, DEFAULT_HIDDEN_DROPOUT,
    DEFAULT_INPUT_DROPOUT, FORMAT_VERSION,
};
use crate::rng::{derive_seed, seeded, TAG_DROPOUT, TAG_INIT_A, TAG_INIT_B, TAG_SHUFFLE};

pub const DEFAULT_HIDDEN_UNITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("input dimension {found} does not match the model's {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite label for sample {0}")]
    NonFiniteLabel(usize),
    #[error("non-finite {stream} loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        stream: &'static str,
    },
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("unsupported model format_version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub target_len: usize,
    pub joint_loss: bool,
    pub hidden_units: usize,
    pub pooling: Pooling,
    pub input_dropout: f64,
    pub hidden_dropout: f64,
    /// Per-feature z-scoring with training-set statistics.
    pub normalize: bool,
    /// Global gradient-norm clip applied to each batch gradient.
    pub clip_norm: Option<f64>,
    /// Start both head biases at the mean training label instead of zero.
    pub bias_from_labels: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.001,
            batch_size: 8,
            seed: 0,
            target_len: 300,
            joint_loss: false,
            hidden_units: DEFAULT_HIDDEN_UNITS,
            pooling: Pooling::FinalState,
            input_dropout: DEFAULT_INPUT_DROPOUT,
            hidden_dropout: DEFAULT_HIDDEN_DROPOUT,
            normalize: true,
            clip_norm: None,
            bias_from_labels: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.target_len < 2 {
            return bad("target_len must be at least 2");
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        for rate in [self.input_dropout, self.hidden_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return bad("dropout rates must lie in [0, 1)");
            }
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip_norm must be positive");
        }
        Ok(())
    }
}

/// Paired streams of one video plus its label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub absolute: FeatureSequence,
    pub differential: FeatureSequence,
    pub label: f64,
}

impl TrainingSample {
    /// Aligns `frames` and derives both streams.
    pub fn from_landmarks(
        frames: &[LandmarkFrame],
        template: &AlignmentTemplate,
        mode: AlignmentMode,
        label: f64,
    ) -> Result<Self, PipelineError> {
        let mut absolute = absolute_features(frames, template, mode)?;
        absolute.label = Some(label);
        let differential = differential_features(&absolute)?;
        Ok(Self {
            absolute,
            differential,
            label,
        })
    }
}

/// Per-feature affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation over every timestep;
    /// constant features keep unit scale.
    pub fn fit<'a>(sequences: impl Iterator<Item = &'a [Vec<f64>]> + Clone, dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for seq in sequences.clone() {
            for v in seq {
                mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
                count += 1;
            }
        }
        if count == 0 {
            return Self::identity(dim);
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; dim];
        for seq in sequences {
            for v in seq {
                for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                    *s += (x - m) * (x - m);
                }
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
        seq.iter()
            .map(|v| {
                v.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((x, m), s)| (x - m) / s)
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub template_hash: String,
    pub target_len: usize,
    pub seed: u64,
    pub standardize_absolute: Standardizer,
    pub standardize_differential: Standardizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualStreamModel {
    pub stream_a: BiGruRegressor,
    pub stream_b: BiGruRegressor,
    pub metadata: ModelMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossStream {
    Absolute,
    Differential,
    Joint,
}

impl LossStream {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossStream::Absolute => "absolute",
            LossStream::Differential => "differential",
            LossStream::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    /// 1-based.
    pub epoch: usize,
    pub stream: LossStream,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub metadata: ModelMetadata,
    pub stream_a: RegressorDocument,
    pub stream_b: RegressorDocument,
}

impl DualStreamModel {
    pub fn input_dim(&self) -> usize {
        self.stream_a.d()
    }

    pub fn param_count(&self) -> usize {
        self.stream_a.param_count() + self.stream_b.param_count()
    }

    /// Both streams, untrained, with identity standardization.
    pub fn init(d: usize, cfg: &TrainConfig) -> Self {
        let mut stream_a = BiGruRegressor::init(d, cfg.hidden_units, derive_seed(cfg.seed, TAG_INIT_A));
        let mut stream_b = BiGruRegressor::init(d, cfg.hidden_units, derive_seed(cfg.seed, TAG_INIT_B));
        for s in [&mut stream_a, &mut stream_b] {
            s.pooling = cfg.pooling;
            s.input_dropout_rate = cfg.input_dropout;
            s.hidden_dropout_rate = cfg.hidden_dropout;
        }
        Self {
            stream_a,
            stream_b,
            metadata: ModelMetadata {
                template_hash: AlignmentTemplate::canonical().fingerprint(),
                target_len: cfg.target_len,
                seed: cfg.seed,
                standardize_absolute: Standardizer::identity(d),
                standardize_differential: Standardizer::identity(d),
            },
        }
    }

    fn prepare(&self, seq: &FeatureSequence, standardizer: &Standardizer) -> Result<Vec<Vec<f64>>, PipelineError> {
        if seq.dim() != self.input_dim() {
            return Err(PipelineError::DimensionMismatch {
                expected: self.input_dim(),
                found: seq.dim(),
            });
        }
        let resampled = temporal_resample(seq, self.metadata.target_len)?;
        Ok(standardizer.apply(&resampled.vectors))
    }

    /// Per-stream predictions `(absolute, differential)`, dropout off.
    pub fn predict_streams(&self, a: &FeatureSequence, b: &FeatureSequence) -> Result<(f64, f64), PipelineError> {
        let xa = self.prepare(a, &self.metadata.standardize_absolute)?;
        let xb = self.prepare(b, &self.metadata.standardize_differential)?;
        Ok((self.stream_a.predict(&xa)?, self.stream_b.predict(&xb)?))
    }

    /// Mean of the two stream outputs.
    pub fn predict(&self, a: &FeatureSequence, b: &FeatureSequence) -> Result<f64, PipelineError> {
        let (pa, pb) = self.predict_streams(a, b)?;
        Ok(0.5 * (pa + pb))
    }

    pub fn to_document(&self) -> Result<ModelDocument, PipelineError> {
        Ok(ModelDocument {
            format_version: FORMAT_VERSION,
            metadata: self.metadata.clone(),
            stream_a: RegressorDocument::from_model(&self.stream_a, None)?,
            stream_b: RegressorDocument::from_model(&self.stream_b, None)?,
        })
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(&self.to_document()?).expect("plain data serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PipelineError::Malformed(e.to_string()))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => return Err(PipelineError::UnsupportedVersion(v as u32)),
            None => return Err(PipelineError::Malformed("missing format_version".into())),
        }
        let doc: ModelDocument =
            serde_json::from_value(raw).map_err(|e| PipelineError::Malformed(e.to_string()))?;
        let (stream_a, _) = doc.stream_a.to_model().map_err(version_error)?;
        let (stream_b, _) = doc.stream_b.to_model().map_err(version_error)?;
        if stream_a.d() != stream_b.d() {
            return Err(PipelineError::InconsistentDimensions(format!(
                "stream_a reads {} features, stream_b {}",
                stream_a.d(),
                stream_b.d()
            )));
        }
        let d = stream_a.d();
        let m = &doc.metadata;
        for s in [&m.standardize_absolute, &m.standardize_differential] {
            if s.mean.len() != d || s.scale.len() != d {
                return Err(PipelineError::Malformed("standardizer width differs from model input".into()));
            }
        }
        if m.target_len < 2 {
            return Err(PipelineError::Malformed("target_len must be at least 2".into()));
        }
        Ok(Self {
            stream_a,
            stream_b,
            metadata: doc.metadata,
        })
    }
}

fn version_error(e: NeuralError) -> PipelineError {
    match e {
        NeuralError::UnsupportedVersion(v) => PipelineError::UnsupportedVersion(v),
        other => PipelineError::Neural(other),
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DualStreamModel,
    pub loss_log: Vec<LossRecord>,
}

fn check_samples(samples: &[TrainingSample]) -> Result<usize, PipelineError> {
    let first = samples.first().ok_or(PipelineError::EmptyDataset)?;
    let d = first.absolute.dim();
    if d == 0 {
        return Err(PipelineError::InconsistentDimensions("zero-width features".into()));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.absolute.is_empty() || s.differential.is_empty() {
            return Err(PipelineError::InconsistentDimensions(format!("sample {i} has an empty stream")));
        }
        if s.absolute.dim() != d || s.differential.dim() != d {
            return Err(PipelineError::InconsistentDimensions(format!(
                "sample {i}: absolute width {}, differential width {}, expected {d}",
                s.absolute.dim(),
                s.differential.dim()
            )));
        }
        if !s.label.is_finite() {
            return Err(PipelineError::NonFiniteLabel(i));
        }
    }
    Ok(d)
}

struct PreparedSet {
    absolute: Vec<Vec<Vec<f64>>>,
    differential: Vec<Vec<Vec<f64>>>,
    labels: Vec<f64>,
}

fn prepare_set(model: &DualStreamModel, samples: &[TrainingSample]) -> Result<PreparedSet, PipelineError> {
    let mut absolute = Vec::with_capacity(samples.len());
    let mut differential = Vec::with_capacity(samples.len());
    for s in samples {
        absolute.push(model.prepare(&s.absolute, &model.metadata.standardize_absolute)?);
        differential.push(model.prepare(&s.differential, &model.metadata.standardize_differential)?);
    }
    Ok(PreparedSet {
        absolute,
        differential,
        labels: samples.iter().map(|s| s.label).collect(),
    })
}

fn fit_standardizers(model: &mut DualStreamModel, samples: &[TrainingSample]) -> Result<(), PipelineError> {
    let d = model.input_dim();
    let len = model.metadata.target_len;
    let mut a = Vec::with_capacity(samples.len());
    let mut b = Vec::with_capacity(samples.len());
    for s in samples {
        a.push(temporal_resample(&s.absolute, len)?.vectors);
        b.push(temporal_resample(&s.differential, len)?.vectors);
    }
    model.metadata.standardize_absolute = Standardizer::fit(a.iter().map(Vec::as_slice), d);
    model.metadata.standardize_differential = Standardizer::fit(b.iter().map(Vec::as_slice), d);
    Ok(())
}

fn clip(grads: &mut BiGruWeights, limit: Option<f64>) {
    if let Some(limit) = limit {
        let norm = grads.l2_norm();
        if norm > limit {
            grads.scale(limit / norm);
        }
    }
}

/// Deterministic per-forward dropout seed.
fn dropout_seed(seed: u64, stream: LossStream, counter: u64) -> u64 {
    derive_seed(derive_seed(derive_seed(seed, TAG_DROPOUT), stream as u64), counter)
}

fn epoch_orders(seed: u64, n: usize, epochs: usize) -> Vec<Vec<usize>> {
    let mut rng = seeded(derive_seed(seed, TAG_SHUFFLE));
    (0..epochs)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect()
}

/// Fits one regressor against the labels with its own loss and optimizer.
fn fit_stream(
    reg: &mut BiGruRegressor,
    inputs: &[Vec<Vec<f64>>],
    labels: &[f64],
    cfg: &TrainConfig,
    stream: LossStream,
) -> Result<Vec<LossRecord>, PipelineError> {
    let adam = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = AdamState::for_weights(&reg.weights, adam);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut counter = 0u64;
    for (epoch, order) in epoch_orders(cfg.seed, inputs.len(), cfg.epochs).into_iter().enumerate() {
        let mut total = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = BiGruWeights::zeros(reg.d(), reg.k());
            let mut batch_loss = 0.0;
            for &i in idx {
                let mode = ForwardMode::Training {
                    seed: dropout_seed(cfg.seed, stream, counter),
                };
                counter += 1;
                let (pred, cache) = reg.forward(&inputs[i], mode)?;
                batch_loss += smooth_l1(pred, labels[i]);
                let g = backward(reg, &cache, smooth_l1_grad(pred, labels[i]) / idx.len() as f64)?;
                grads.add_assign(&g);
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(PipelineError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch,
                    stream: stream.as_str(),
                });
            }
            clip(&mut grads, cfg.clip_norm);
            adam_step(&mut reg.weights, &grads, &mut state)?;
            total += batch_loss;
        }
        log.push(LossRecord {
            epoch: epoch + 1,
            stream,
            mean_loss: total / inputs.len() as f64,
        });
    }
    Ok(log)
}

/// Loss on the averaged output, both streams updated from it.
fn fit_joint(model: &mut DualStreamModel, data: &PreparedSet, cfg: &TrainConfig) -> Result<Vec<LossRecord>, PipelineError> {
    let adam = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut state_a = AdamState::for_weights(&model.stream_a.weights, adam);
    let mut state_b = AdamState::for_weights(&model.stream_b.weights, adam);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut counter = 0u64;
    let (d, k) = (model.input_dim(), model.stream_a.k());
    for (epoch, order) in epoch_orders(cfg.seed, data.labels.len(), cfg.epochs).into_iter().enumerate() {
        let mut total = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mut ga = BiGruWeights::zeros(d, k);
            let mut gb = BiGruWeights::zeros(d, k);
            let mut batch_loss = 0.0;
            for &i in idx {
                let (pa, ca) = model.stream_a.forward(
                    &data.absolute[i],
                    ForwardMode::Training {
                        seed: dropout_seed(cfg.seed, LossStream::Absolute, counter),
                    },
                )?;
                let (pb, cb) = model.stream_b.forward(
                    &data.differential[i],
                    ForwardMode::Training {
                        seed: dropout_seed(cfg.seed, LossStream::Differential, counter),
                    },
                )?;
                counter += 1;
                let pred = 0.5 * (pa + pb);
                batch_loss += smooth_l1(pred, data.labels[i]);
                let upstream = 0.5 * smooth_l1_grad(pred, data.labels[i]) / idx.len() as f64;
                ga.add_assign(&backward(&model.stream_a, &ca, upstream)?);
                gb.add_assign(&backward(&model.stream_b, &cb, upstream)?);
            }
            if !batch_loss.is_finite() || !ga.all_finite() || !gb.all_finite() {
                return Err(PipelineError::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch,
                    stream: LossStream::Joint.as_str(),
                });
            }
            clip(&mut ga, cfg.clip_norm);
            clip(&mut gb, cfg.clip_norm);
            adam_step(&mut model.stream_a.weights, &ga, &mut state_a)?;
            adam_step(&mut model.stream_b.weights, &gb, &mut state_b)?;
            total += batch_loss;
        }
        log.push(LossRecord {
            epoch: epoch + 1,
            stream: LossStream::Joint,
            mean_loss: total / data.labels.len() as f64,
        });
    }
    Ok(log)
}

/// Trains a fresh dual-stream model.
///
/// Standardizers are fitted on the training set and, unless disabled, both
/// head biases start at the mean label. The loss log is ordered by epoch, then stream.
pub fn train(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    let d = check_samples(samples)?;
    let mut model = DualStreamModel::init(d, cfg);
    if cfg.normalize {
        fit_standardizers(&mut model, samples)?;
    }
    if cfg.bias_from_labels {
        let mean_label = samples.iter().map(|s| s.label).sum::<f64>() / samples.len() as f64;
        model.stream_a.weights.head_bias = mean_label;
        model.stream_b.weights.head_bias = mean_label;
    }

    let data = prepare_set(&model, samples)?;
    let mut loss_log = if cfg.joint_loss {
        fit_joint(&mut model, &data, cfg)?
    } else {
        let mut log = fit_stream(&mut model.stream_a, &data.absolute, &data.labels, cfg, LossStream::Absolute)?;
        log.extend(fit_stream(
            &mut model.stream_b,
            &data.differential,
            &data.labels,
            cfg,
            LossStream::Differential,
        )?);
        log
    };
    loss_log.sort_by_key(|r| (r.epoch, r.stream as u8));
    Ok(TrainOutcome { model, loss_log })
}

/// Continues training a single stream of an existing model; the other
/// stream and the standardizers are left untouched.
pub fn retrain_stream(
    model: &mut DualStreamModel,
    samples: &[TrainingSample],
    cfg: &TrainConfig,
    stream: LossStream,
) -> Result<Vec<LossRecord>, PipelineError> {
    cfg.validate()?;
    let d = check_samples(samples)?;
    if d != model.input_dim() {
        return Err(PipelineError::DimensionMismatch {
            expected: model.input_dim(),
            found: d,
        });
    }
    let data = prepare_set(model, samples)?;
    match stream {
        LossStream::Absolute => fit_stream(&mut model.stream_a, &data.absolute, &data.labels, cfg, stream),
        LossStream::Differential => {
            fit_stream(&mut model.stream_b, &data.differential, &data.labels, cfg, stream)
        }
        LossStream::Joint => Err(PipelineError::InvalidConfig("retrain one stream at a time".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub rmse: f64,
    pub mae: f64,
    /// `prediction - label`, in input order.
    pub residuals: Vec<f64>,
}

impl EvalResult {
    fn from_residuals(residuals: Vec<f64>) -> Self {
        let n = residuals.len() as f64;
        let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
        let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
        assert!(
            rmse >= mae * (1.0 - 1e-12),
            "rmse {rmse} below mae {mae}"
        );
        Self { rmse, mae, residuals }
    }
}

pub fn evaluate(predictions: &[f64], labels: &[f64]) -> Result<EvalResult, PipelineError> {
    if predictions.len() != labels.len() {
        return Err(PipelineError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    Ok(EvalResult::from_residuals(
        predictions.iter().zip(labels).map(|(p, l)| p - l).collect(),
    ))
}
