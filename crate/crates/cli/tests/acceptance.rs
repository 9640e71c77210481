//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use facemotion::calibration::{
    calibrate_sequence, kalman_init, kalman_predict, kalman_update, KalmanConfig, KalmanTrack,
    LandmarkFrame, LandmarkSource,
};
use facemotion::derive_seed;
use facemotion::features::{AlignmentMode, AlignmentTemplate};
use facemotion::flow::{
    forward_backward_check, lk_point_flow, pyramidal_flow, FlowConfig, FlowVector, ValidatedFlow,
};
use facemotion::imaging::{build_pyramid, GrayFrame, ImagePyramid};
use facemotion::neural::{backward, smooth_l1, smooth_l1_grad, BiGruRegressor, ForwardMode};
use facemotion::pipeline::{evaluate, train, DualStreamModel, TrainConfig, TrainingSample};
use facemotion::synth::{
    calibration_bench_preset, gen_regression_dataset, gen_sample, gen_trajectory, render_frames,
    RegressionConfig, TrajectoryConfig,
};

/// Deterministic uniform draws built on the crate's seed derivation.
struct Draws {
    seed: u64,
    n: u64,
}

impl Draws {
    fn new(seed: u64) -> Self {
        Self { seed, n: 0 }
    }

    fn unit(&mut self) -> f64 {
        self.n += 1;
        (derive_seed(self.seed, self.n) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn single_level() -> FlowConfig {
    FlowConfig {
        num_levels: 1,
        ..FlowConfig::default()
    }
}

/// Static 68-blob face in frame 0, translated by `d` in frame 1.
fn face_pair(seed: u64, d: (f64, f64)) -> (Vec<[f64; 2]>, Vec<GrayFrame>) {
    let cfg = TrajectoryConfig {
        num_frames: 2,
        motion_amplitude: 0.0,
        seed,
        ..TrajectoryConfig::default()
    };
    let first = gen_trajectory(&cfg).unwrap().remove(0);
    let moved = first.points.iter().map(|p| [p[0] + d.0, p[1] + d.1]).collect();
    let points = first.points.clone();
    let truth = vec![first, LandmarkFrame::new(1, moved, LandmarkSource::Detected)];
    (points, render_frames(&truth, 256, 256, cfg.blob_sigma, seed).unwrap())
}

fn pyramid(frame: &GrayFrame, cfg: &FlowConfig) -> ImagePyramid {
    build_pyramid(frame, cfg.num_levels, cfg.scale_factor).unwrap()
}

fn flow_err(f: FlowVector, d: (f64, f64)) -> f64 {
    (f.u - d.0).hypot(f.v - d.1)
}

fn mean_landmark_error(a: &[LandmarkFrame], b: &[LandmarkFrame]) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for (fa, fb) in a.iter().zip(b) {
        for (p, q) in fa.points.iter().zip(&fb.points) {
            total += (p[0] - q[0]).hypot(p[1] - q[1]);
            n += 1;
        }
    }
    total / n as f64
}

fn flow_recovery() -> Verdict {
    let cfg = single_level();
    let (mut ok, mut worst_time, mut worst_err) = (0, 0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut r = Draws::new(seed);
        let (mag, theta) = (r.range(0.1, 2.0), r.range(0.0, std::f64::consts::TAU));
        let d = (mag * theta.cos(), mag * theta.sin());
        let (points, frames) = face_pair(seed, d);
        let start = Instant::now();
        let errs: Vec<f64> = points
            .iter()
            .map(|p| {
                lk_point_flow(&frames[0], &frames[1], (p[0], p[1]), FlowVector::ZERO, &cfg)
                    .map_or(f64::INFINITY, |f| flow_err(f, d))
            })
            .collect();
        worst_time = worst_time.max(start.elapsed().as_secs_f64());
        let trial_max = errs.iter().copied().fold(0.0, f64::max);
        worst_err = worst_err.max(trial_max);
        if trial_max <= 0.1 {
            ok += 1;
        }
    }
    verdict(
        ok >= 95 && worst_time < 1.0,
        format!("{ok}/100 trials with every landmark within 0.1 px (worst point {worst_err:.4} px); slowest pair {:.1} ms", worst_time * 1e3),
    )
}

fn pyramid_benefit() -> Verdict {
    let pyr_cfg = FlowConfig::default();
    let single = single_level();
    let (mut ok, mut worst_pyr, mut best_single) = (0, 0.0f64, f64::INFINITY);
    for seed in 0..50u64 {
        let theta = Draws::new(1000 + seed).range(0.0, std::f64::consts::TAU);
        let d = (8.0 * theta.cos(), 8.0 * theta.sin());
        let (points, frames) = face_pair(seed, d);
        let (pa, pb) = (pyramid(&frames[0], &pyr_cfg), pyramid(&frames[1], &pyr_cfg));
        let (mut pe, mut se) = (0.0, 0.0);
        for p in &points {
            pe += pyramidal_flow(&pa, &pb, (p[0], p[1]), &pyr_cfg).map_or(8.0, |f| flow_err(f, d));
            // A singular solve returns no motion at all: an 8 px miss.
            se += lk_point_flow(&frames[0], &frames[1], (p[0], p[1]), FlowVector::ZERO, &single)
                .map_or(8.0, |f| flow_err(f, d));
        }
        let n = points.len() as f64;
        let (pe, se) = (pe / n, se / n);
        worst_pyr = worst_pyr.max(pe);
        best_single = best_single.min(se);
        if pe <= 0.5 && se > 2.0 {
            ok += 1;
        }
    }
    verdict(
        ok == 50,
        format!("{ok}/50 seeds; worst 3-level mean error {worst_pyr:.3} px, best single-level {best_single:.2} px"),
    )
}

fn two_way_denoise() -> Verdict {
    let cfg = FlowConfig::default();

    // Detections never enter the flow computation: frames are identical with
    // and without outliers, and flow at outlier-hit landmarks is as accurate
    // as flow anywhere else.
    let bench = calibration_bench_preset(3);
    let noisy = gen_sample(&bench, true).unwrap();
    let clean = gen_sample(&TrajectoryConfig { outlier_rate: 0.0, ..bench }, true).unwrap();
    let frames_equal = noisy.frames == clean.frames;
    let (mut hit, mut all) = ((0.0, 0usize, 0usize), (0.0, 0usize, 0usize));
    for t in 0..60 {
        let (pa, pb) = (pyramid(&noisy.frames[t], &cfg), pyramid(&noisy.frames[t + 1], &cfg));
        for (j, &outlier) in noisy.outliers[t].iter().enumerate() {
            let p = noisy.ground_truth[t].points[j];
            let q = noisy.ground_truth[t + 1].points[j];
            let v = forward_backward_check(&pa, &pb, (p[0], p[1]), &cfg);
            let e = flow_err(v.flow, (q[0] - p[0], q[1] - p[1]));
            for acc in std::iter::once(&mut all).chain(outlier.then_some(&mut hit)) {
                acc.0 += e;
                acc.1 += 1;
                acc.2 += usize::from(!v.valid);
            }
        }
    }
    let mean = |a: (f64, usize, usize)| a.0 / a.1 as f64;
    let outliers_ok = frames_equal && hit.1 > 0 && hit.2 * 10 <= hit.1 && mean(hit) <= 1.5 * mean(all);

    let (mut noise_invalid, mut clean_invalid, mut total) = (0usize, 0usize, 0usize);
    for seed in 0..100u64 {
        let mut r = Draws::new(5000 + seed);
        let d = (r.range(-2.0, 2.0), r.range(-2.0, 2.0));
        let (points, frames) = face_pair(seed, d);
        let noise = GrayFrame::from_fn(256, 256, 1, |_, _| r.range(0.0, 255.0));
        let (pa, pb, pn) = (pyramid(&frames[0], &cfg), pyramid(&frames[1], &cfg), pyramid(&noise, &cfg));
        for p in &points {
            total += 1;
            noise_invalid += usize::from(!forward_backward_check(&pa, &pn, (p[0], p[1]), &cfg).valid);
            clean_invalid += usize::from(!forward_backward_check(&pa, &pb, (p[0], p[1]), &cfg).valid);
        }
    }
    let noise_rate = noise_invalid as f64 / total as f64;
    let clean_rate = clean_invalid as f64 / total as f64;
    verdict(
        outliers_ok && noise_rate >= 0.9 && clean_rate <= 0.1,
        format!(
            "outlier landmarks: {} sampled, {} invalid, mean flow error {:.3} px vs {:.3} px overall, frames independent of detections: {frames_equal}; \
             noise frames flagged {:.1}%, clean points flagged {:.2}% ({total} points, 100 seeds)",
            hit.1,
            hit.2,
            mean(hit),
            mean(all),
            100.0 * noise_rate,
            100.0 * clean_rate
        ),
    )
}

fn calibration_improvement() -> Verdict {
    let start = Instant::now();
    let mut gains = Vec::new();
    let (mut raw_sum, mut cal_sum) = (0.0, 0.0);
    for seed in 0..10u64 {
        let s = gen_sample(&calibration_bench_preset(seed), true).unwrap();
        let (out, _) =
            calibrate_sequence(&s.frames, &s.noisy_detections, &FlowConfig::default(), &KalmanConfig::default())
                .unwrap();
        let raw = mean_landmark_error(&s.noisy_detections, &s.ground_truth);
        let cal = mean_landmark_error(&out, &s.ground_truth);
        raw_sum += raw;
        cal_sum += cal;
        gains.push(1.0 - cal / raw);
    }
    let gain = gains.iter().sum::<f64>() / gains.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        gain >= 0.3 && secs < 120.0,
        format!(
            "mean error {:.3} px raw vs {:.3} px calibrated, mean reduction {:.1}% over 10 seeds in {secs:.1} s",
            raw_sum / 10.0,
            cal_sum / 10.0,
            100.0 * gain
        ),
    )
}

fn kalman_limits() -> Verdict {
    let mut r = Draws::new(77);
    let (mut worst_meas, mut worst_prior, mut trace_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..1000 {
        let cfg = KalmanConfig {
            process_noise_q: r.range(0.0, 2.0),
            measurement_noise_r: r.range(0.05, 5.0),
            reject_inflation: r.range(1.0, 8.0),
        };
        let mut track = kalman_init([r.range(0.0, 256.0), r.range(0.0, 256.0)], &cfg);
        let flow = ValidatedFlow {
            flow: FlowVector::new(r.range(-3.0, 3.0), r.range(-3.0, 3.0)),
            valid: r.unit() < 0.7,
            fb_error: 0.0,
        };
        track = kalman_predict(&track, &flow);
        let z = [r.range(0.0, 256.0), r.range(0.0, 256.0)];

        let post = kalman_update(&KalmanTrack { measurement_noise_r: 1e-12, ..track }, z);
        worst_meas = worst_meas.max((post.state_mean[0] - z[0]).abs().max((post.state_mean[1] - z[1]).abs()));

        let certain = KalmanTrack {
            state_cov: [[1e-12, 0.0], [0.0, 1e-12]],
            ..track
        };
        let post = kalman_update(&certain, z);
        worst_prior = worst_prior
            .max((post.state_mean[0] - track.state_mean[0]).abs().max((post.state_mean[1] - track.state_mean[1]).abs()));

        trace_ok &= kalman_update(&track, z).trace() <= track.trace();
    }
    verdict(
        worst_meas <= 1e-6 && worst_prior <= 1e-6 && trace_ok,
        format!("1000 random tracks: r->0 gap {worst_meas:.2e}, P->0 gap {worst_prior:.2e}, trace never grew: {trace_ok}"),
    )
}

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let (d, k, t) = (4, 3, 5);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut r = Draws::new(900 + seed);
        let mut model = BiGruRegressor::init(d, k, seed);
        for block in model.weights.slices_mut() {
            block.iter_mut().for_each(|v| *v += r.range(-0.3, 0.3));
        }
        let seq: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| r.range(-1.0, 1.0)).collect()).collect();
        let target = r.range(-1.0, 1.0);
        let mode = ForwardMode::Training { seed: seed + 31 };
        let loss = |m: &BiGruRegressor| smooth_l1(m.forward(&seq, mode).unwrap().0, target);

        let (pred, cache) = model.forward(&seq, mode).unwrap();
        let grads = backward(&model, &cache, smooth_l1_grad(pred, target)).unwrap();
        let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.iter().copied()).collect();

        let lens: Vec<usize> = model.weights.slices().iter().map(|s| s.len()).collect();
        let mut idx = 0;
        for (b, len) in lens.into_iter().enumerate() {
            for i in 0..len {
                let orig = model.weights.slices()[b][i];
                model.weights.slices_mut()[b][i] = orig + h;
                let up = loss(&model);
                model.weights.slices_mut()[b][i] = orig - h;
                let down = loss(&model);
                model.weights.slices_mut()[b][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[idx];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
                idx += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && secs < 10.0,
        format!("k=3 d=4 T=5, 10 seeds, every parameter: worst relative error {worst:.2e} in {secs:.2} s"),
    )
}

fn loss_function() -> Verdict {
    // Small enough that the slope contributes < 1e-12 across the gap.
    let eps = 1e-13;
    let mut worst_value = 0.0f64;
    let mut worst_slope = 0.0f64;
    for x in [1.0, -1.0] {
        worst_value = worst_value.max((smooth_l1(x - eps, 0.0) - smooth_l1(x + eps, 0.0)).abs());
        worst_value = worst_value.max((smooth_l1(x, 0.0) - 0.5).abs());
        worst_slope = worst_slope.max((smooth_l1_grad(x - eps, 0.0) - smooth_l1_grad(x + eps, 0.0)).abs());
        worst_slope = worst_slope.max((smooth_l1_grad(x, 0.0) - x).abs());
    }
    let spots = smooth_l1(0.5, 0.0) == 0.125 && smooth_l1(2.0, 0.0) == 1.5;
    verdict(
        worst_value <= 1e-12 && worst_slope <= 1e-12 && spots,
        format!(
            "jump at |x|=1: value {worst_value:.1e}, slope {worst_slope:.1e}; f(0.5)={}, f(2)={}",
            smooth_l1(0.5, 0.0),
            smooth_l1(2.0, 0.0)
        ),
    )
}

fn metrics() -> Verdict {
    let mut r = Draws::new(4242);
    let mut ordered = 0;
    for _ in 0..1000 {
        let n = 1 + (r.unit() * 50.0) as usize;
        let p: Vec<f64> = (0..n).map(|_| r.range(-100.0, 100.0)).collect();
        let l: Vec<f64> = (0..n).map(|_| r.range(0.0, 63.0)).collect();
        let e = evaluate(&p, &l).unwrap();
        if e.rmse >= e.mae * (1.0 - 1e-12) {
            ordered += 1;
        }
    }
    let w = evaluate(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
    let worked = w.mae == 3.5 && w.rmse == 12.5f64.sqrt();
    verdict(
        ordered == 1000 && worked,
        format!("RMSE >= MAE on {ordered}/1000 random sets; (0,0) vs (3,4): MAE {} RMSE {}", w.mae, w.rmse),
    )
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let data = gen_regression_dataset(&RegressionConfig::default(), 7).unwrap();
    let template = AlignmentTemplate::canonical();
    let samples: Vec<TrainingSample> = data
        .iter()
        .map(|s| {
            TrainingSample::from_landmarks(&s.noisy_detections, &template, AlignmentMode::Similarity, s.label.unwrap())
                .unwrap()
        })
        .collect();
    let (train_set, test_set) = samples.split_at(160);
    let cfg = TrainConfig {
        epochs: 100,
        target_len: 32,
        seed: 1,
        ..TrainConfig::default()
    };
    let outcome = train(train_set, &cfg).unwrap();
    let labels: Vec<f64> = test_set.iter().map(|s| s.label).collect();
    let preds: Vec<f64> = test_set
        .iter()
        .map(|s| outcome.model.predict(&s.absolute, &s.differential).unwrap())
        .collect();
    let mean_label = train_set.iter().map(|s| s.label).sum::<f64>() / train_set.len() as f64;
    let baseline = evaluate(&vec![mean_label; labels.len()], &labels).unwrap();
    let model = evaluate(&preds, &labels).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ratio = model.mae / baseline.mae;
    verdict(
        ratio <= 0.5 && secs < 600.0,
        format!(
            "200 samples (160/40), k=64, {} epochs: test MAE {:.3} (RMSE {:.3}) vs mean-predictor MAE {:.3}, ratio {:.1}%, {secs:.0} s",
            cfg.epochs,
            model.mae,
            model.rmse,
            baseline.mae,
            100.0 * ratio
        ),
    )
}

fn parameter_count() -> Verdict {
    let (d, k) = (136usize, 64usize);
    let reported = DualStreamModel::init(d, &TrainConfig::default()).param_count();
    let closed = 2 * (2 * 3 * (k * d + k * k + k) + 2 * k + 1);
    verdict(
        reported == closed && closed == 154_626 && reported < 1_000_000,
        format!("reported {reported}, closed form {closed}"),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_facemotion"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&o.stderr).into_owned())
    }
}

fn determinism() -> Verdict {
    let run = || -> Result<bool, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
        std::fs::write(
            p("cfg.json"),
            r#"{"synth": {"regression_dataset": {"n_samples": 20}}, "train": {"epochs": 4, "target_len": 16}}"#,
        )
        .map_err(|e| e.to_string())?;
        cli(&["synth", "--preset", "regression-dataset", "--out", &p("data"), "--seed", "5", "--config", &p("cfg.json")])?;
        let manifest = p("data/manifest.json");
        for tag in ["1", "2"] {
            cli(&[
                "train", "--manifest", &manifest, "--model-out", &p(&format!("model{tag}.json")),
                "--log-out", &p(&format!("loss{tag}.csv")), "--seed", "13", "--config", &p("cfg.json"),
            ])?;
        }
        let read = |name: &str| std::fs::read(Path::new(&p(name))).unwrap_or_default();
        Ok(read("model1.json") == read("model2.json")
            && read("loss1.csv") == read("loss2.csv")
            && !read("model1.json").is_empty())
    };
    match run() {
        Ok(same) => verdict(same, format!("two CLI train runs with seed 13: model and loss log byte-identical: {same}")),
        Err(e) => verdict(false, format!("CLI failed: {e}")),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("flow recovery", flow_recovery),
        ("pyramid benefit", pyramid_benefit),
        ("two-way denoise", two_way_denoise),
        ("calibration improvement", calibration_improvement),
        ("kalman limiting cases", kalman_limits),
        ("gradient correctness", gradient_check),
        ("loss function", loss_function),
        ("metrics", metrics),
        ("end-to-end learning", end_to_end),
        ("parameter accounting", parameter_count),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
