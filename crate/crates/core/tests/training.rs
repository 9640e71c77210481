use facemotion::features::{AlignmentMode, AlignmentTemplate};
use facemotion::pipeline::{evaluate, train, DualStreamModel, TrainConfig, TrainingSample};
use facemotion::synth::{gen_regression_dataset, RegressionConfig};

fn samples(n: usize, seed: u64) -> Vec<TrainingSample> {
    let cfg = RegressionConfig {
        n_samples: n,
        ..RegressionConfig::default()
    };
    let template = AlignmentTemplate::canonical();
    gen_regression_dataset(&cfg, seed)
        .unwrap()
        .iter()
        .map(|s| {
            TrainingSample::from_landmarks(&s.noisy_detections, &template, AlignmentMode::Similarity, s.label.unwrap())
                .unwrap()
        })
        .collect()
}

#[test]
fn single_sample_is_memorized() {
    let mut s = samples(2, 3).remove(0);
    s.label = 7.0;
    let cfg = TrainConfig {
        epochs: 200,
        target_len: 32,
        seed: 2,
        input_dropout: 0.0,
        hidden_dropout: 0.0,
        bias_from_labels: false,
        ..TrainConfig::default()
    };
    let out = train(std::slice::from_ref(&s), &cfg).unwrap();
    let p = out.model.predict(&s.absolute, &s.differential).unwrap();
    assert!((p - 7.0).abs() < 0.5, "prediction {p}");
    let first = out.loss_log.first().unwrap().mean_loss;
    let last = out.loss_log.last().unwrap().mean_loss;
    assert!(last < first);
}

#[test]
fn same_seed_same_bytes() {
    let data = samples(6, 5);
    let cfg = TrainConfig {
        epochs: 3,
        target_len: 16,
        batch_size: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(&data, &cfg).unwrap();
    let b = train(&data, &cfg).unwrap();
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    assert_eq!(a.loss_log, b.loss_log);

    let c = train(&data, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.model.to_json().unwrap(), c.model.to_json().unwrap());
}

#[test]
fn saved_model_predicts_identically() {
    let data = samples(4, 8);
    let cfg = TrainConfig {
        epochs: 2,
        target_len: 16,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&data, &cfg).unwrap();
    let loaded = DualStreamModel::from_json(&out.model.to_json().unwrap()).unwrap();
    let preds: Vec<f64> = data.iter().map(|s| out.model.predict(&s.absolute, &s.differential).unwrap()).collect();
    let again: Vec<f64> = data.iter().map(|s| loaded.predict(&s.absolute, &s.differential).unwrap()).collect();
    assert_eq!(preds, again);
    assert!(preds.iter().all(|p| p.is_finite()));
    let labels: Vec<f64> = data.iter().map(|s| s.label).collect();
    let r = evaluate(&preds, &labels).unwrap();
    assert!(r.rmse >= r.mae);
}

#[test]
fn parameter_count_matches_closed_form() {
    let (d, k) = (136usize, 64usize);
    let model = DualStreamModel::init(d, &TrainConfig::default());
    let closed = 2 * (2 * 3 * (k * d + k * k + k) + 2 * k + 1);
    assert_eq!(model.param_count(), closed);
    assert_eq!(closed, 154_626);
}
