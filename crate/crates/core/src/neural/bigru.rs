//! Bidirectional GRU regressor with a single-unit dense head.
//!
//! Layout of one forward pass:
//!
//! ```text
//! x_t ─ dropout(0.25) ─┬─ GRU→ (left to right) ─ summary ─ dropout(0.5) ─┐
//!                      └─ GRU← (right to left) ─ summary ─ dropout(0.5) ─┴─ concat ─ dropout(0.5) ─ dense(1)
//! ```
//!
//! Dropout is inverted (kept activations scaled by `1 / (1 - rate)` while
//! training) so inference uses the weights unchanged.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gru_step, GruParams, GruStep, NeuralError, GATE_H, GATE_R, GATE_Z};
use crate::rng::seeded;

pub const DEFAULT_INPUT_DROPOUT: f64 = 0.25;
pub const DEFAULT_HIDDEN_DROPOUT: f64 = 0.5;

/// How a direction's hidden states are summarized into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Last hidden state of each direction.
    #[default]
    FinalState,
    /// Mean of every hidden state of each direction.
    MeanOverTime,
}

/// Trainable parameters; also used as the gradient and Adam-moment container.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGruWeights {
    pub forward: GruParams,
    pub backward: GruParams,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl BiGruWeights {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            forward: GruParams::zeros(d, k),
            backward: GruParams::zeros(d, k),
            head_weights: vec![0.0; 2 * k],
            head_bias: 0.0,
        }
    }

    /// Draw order: forward cell, backward cell, head weights.
    pub fn init(d: usize, k: usize, rng: &mut impl Rng) -> Self {
        let forward = GruParams::init(d, k, rng);
        let backward = GruParams::init(d, k, rng);
        let bound = super::xavier_bound(2 * k, 1);
        let head_weights = (0..2 * k).map(|_| rng.random_range(-bound..=bound)).collect();
        Self {
            forward,
            backward,
            head_weights,
            head_bias: 0.0,
        }
    }

    pub fn d(&self) -> usize {
        self.forward.d
    }

    pub fn k(&self) -> usize {
        self.forward.k
    }

    pub fn param_count(&self) -> usize {
        self.forward.param_count() + self.backward.param_count() + self.head_weights.len() + 1
    }

    /// Every parameter block in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.forward.slices();
        out.extend(self.backward.slices());
        out.push(&self.head_weights);
        out.push(std::slice::from_ref(&self.head_bias));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.forward.slices_mut();
        out.extend(self.backward.slices_mut());
        out.push(&mut self.head_weights);
        out.push(std::slice::from_mut(&mut self.head_bias));
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        let (a, b) = (self.slices(), other.slices());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for block in self.slices_mut() {
            block.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGruRegressor {
    pub weights: BiGruWeights,
    pub input_dropout_rate: f64,
    pub hidden_dropout_rate: f64,
    pub pooling: Pooling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Inference,
    /// Dropout active; masks drawn from a generator seeded with `seed`.
    Training { seed: u64 },
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    d: usize,
    k: usize,
    inputs: Vec<Vec<f64>>,
    forward_steps: Vec<GruStep>,
    /// In processing order, i.e. last timestep first.
    backward_steps: Vec<GruStep>,
    mask_forward: Vec<f64>,
    mask_backward: Vec<f64>,
    mask_concat: Vec<f64>,
    head_input: Vec<f64>,
    pooling: Pooling,
}

impl ForwardCache {
    /// The 2k-dimensional representation fed to the dense head.
    pub fn head_input(&self) -> &[f64] {
        &self.head_input
    }

    pub fn forward_states(&self) -> impl Iterator<Item = &[f64]> {
        self.forward_steps.iter().map(|s| s.h.as_slice())
    }

    pub fn backward_states(&self) -> impl Iterator<Item = &[f64]> {
        self.backward_steps.iter().map(|s| s.h.as_slice())
    }
}

fn dropout_mask(rng: Option<&mut impl Rng>, len: usize, rate: f64) -> Vec<f64> {
    match rng {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            (0..len)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect()
        }
        _ => vec![1.0; len],
    }
}

fn run_direction<'a>(params: &GruParams, inputs: impl Iterator<Item = &'a Vec<f64>>) -> Vec<GruStep> {
    let mut steps: Vec<GruStep> = Vec::new();
    let zero = vec![0.0; params.k];
    for x in inputs {
        let h_prev = steps.last().map_or(zero.as_slice(), |s| s.h.as_slice());
        let step = gru_step(params, x, h_prev);
        steps.push(step);
    }
    steps
}

fn summarize(steps: &[GruStep], pooling: Pooling) -> Vec<f64> {
    match pooling {
        Pooling::FinalState => steps.last().expect("non-empty").h.clone(),
        Pooling::MeanOverTime => {
            let k = steps[0].h.len();
            let mut acc = vec![0.0; k];
            for s in steps {
                acc.iter_mut().zip(&s.h).for_each(|(a, h)| *a += h);
            }
            let n = steps.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
    }
}

impl BiGruRegressor {
    pub fn new(weights: BiGruWeights) -> Self {
        Self {
            weights,
            input_dropout_rate: DEFAULT_INPUT_DROPOUT,
            hidden_dropout_rate: DEFAULT_HIDDEN_DROPOUT,
            pooling: Pooling::FinalState,
        }
    }

    /// Xavier-initialized regressor, fully determined by `seed`.
    pub fn init(d: usize, k: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        Self::new(BiGruWeights::init(d, k, &mut rng))
    }

    pub fn zeros(d: usize, k: usize) -> Self {
        Self::new(BiGruWeights::zeros(d, k))
    }

    pub fn d(&self) -> usize {
        self.weights.d()
    }

    pub fn k(&self) -> usize {
        self.weights.k()
    }

    pub fn param_count(&self) -> usize {
        self.weights.param_count()
    }

    pub fn forward(
        &self,
        seq: &[Vec<f64>],
        mode: ForwardMode,
    ) -> Result<(f64, ForwardCache), NeuralError> {
        if seq.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let (d, k) = (self.d(), self.k());
        if let Some(bad) = seq.iter().find(|x| x.len() != d) {
            return Err(NeuralError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let mut rng = match mode {
            ForwardMode::Training { seed } => Some(seeded(seed)),
            ForwardMode::Inference => None,
        };

        let inputs: Vec<Vec<f64>> = match rng.as_mut() {
            Some(r) if self.input_dropout_rate > 0.0 => seq
                .iter()
                .map(|x| {
                    let m = dropout_mask(Some(&mut *r), d, self.input_dropout_rate);
                    x.iter().zip(&m).map(|(a, b)| a * b).collect()
                })
                .collect(),
            _ => seq.to_vec(),
        };

        let forward_steps = run_direction(&self.weights.forward, inputs.iter());
        let backward_steps = run_direction(&self.weights.backward, inputs.iter().rev());
        let summary_f = summarize(&forward_steps, self.pooling);
        let summary_b = summarize(&backward_steps, self.pooling);

        let rate = self.hidden_dropout_rate;
        let mask_forward = dropout_mask(rng.as_mut(), k, rate);
        let mask_backward = dropout_mask(rng.as_mut(), k, rate);
        let mask_concat = dropout_mask(rng.as_mut(), 2 * k, rate);

        let head_input: Vec<f64> = summary_f
            .iter()
            .zip(&mask_forward)
            .chain(summary_b.iter().zip(&mask_backward))
            .zip(&mask_concat)
            .map(|((h, m1), m2)| h * m1 * m2)
            .collect();
        let prediction = super::dot(&self.weights.head_weights, &head_input) + self.weights.head_bias;

        Ok((
            prediction,
            ForwardCache {
                d,
                k,
                inputs,
                forward_steps,
                backward_steps,
                mask_forward,
                mask_backward,
                mask_concat,
                head_input,
                pooling: self.pooling,
            },
        ))
    }

    /// Inference-mode prediction.
    pub fn predict(&self, seq: &[Vec<f64>]) -> Result<f64, NeuralError> {
        self.forward(seq, ForwardMode::Inference).map(|(p, _)| p)
    }
}

/// BPTT through one direction; accumulates into `grads`.
fn backprop_direction<'a>(
    params: &GruParams,
    grads: &mut GruParams,
    inputs: impl Iterator<Item = &'a Vec<f64>>,
    steps: &[GruStep],
    d_summary: &[f64],
    pooling: Pooling,
) {
    let k = params.k;
    let inputs: Vec<&Vec<f64>> = inputs.collect();
    let n = steps.len();
    let zero = vec![0.0; k];
    let per_step: Option<Vec<f64>> = match pooling {
        Pooling::MeanOverTime => Some(d_summary.iter().map(|g| g / n as f64).collect()),
        Pooling::FinalState => None,
    };

    let mut dh = vec![0.0; k];
    let mut da_z = vec![0.0; k];
    let mut da_r = vec![0.0; k];
    let mut da_h = vec![0.0; k];
    let mut d_rh = vec![0.0; k];
    let mut rh = vec![0.0; k];
    for t in (0..n).rev() {
        match &per_step {
            Some(g) => dh.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None if t == n - 1 => dh.iter_mut().zip(d_summary).for_each(|(a, b)| *a += b),
            None => {}
        }
        let s = &steps[t];
        let h_prev: &[f64] = if t > 0 { &steps[t - 1].h } else { &zero };
        let x = inputs[t];

        let mut dh_prev = vec![0.0; k];
        for i in 0..k {
            let (z, c) = (s.z[i], s.candidate[i]);
            da_h[i] = dh[i] * z * (1.0 - c * c);
            da_z[i] = dh[i] * (c - h_prev[i]) * z * (1.0 - z);
            dh_prev[i] = dh[i] * (1.0 - z);
            rh[i] = s.r[i] * h_prev[i];
        }

        grads.w[GATE_H].outer_add(&da_h, x);
        grads.u[GATE_H].outer_add(&da_h, &rh);
        add_into(&mut grads.b[GATE_H], &da_h);
        d_rh.iter_mut().for_each(|v| *v = 0.0);
        params.u[GATE_H].matvec_t_add(&da_h, &mut d_rh);
        for i in 0..k {
            dh_prev[i] += d_rh[i] * s.r[i];
            let r = s.r[i];
            da_r[i] = d_rh[i] * h_prev[i] * r * (1.0 - r);
        }

        for (gate, da) in [(GATE_Z, &da_z), (GATE_R, &da_r)] {
            grads.w[gate].outer_add(da, x);
            grads.u[gate].outer_add(da, h_prev);
            add_into(&mut grads.b[gate], da);
            params.u[gate].matvec_t_add(da, &mut dh_prev);
        }
        dh = dh_prev;
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

/// Exact gradients of `loss` with respect to every parameter, given
/// `loss_gradient = d loss / d prediction` and the cache of the pass that
/// produced the prediction (dropout masks included).
pub fn backward(
    model: &BiGruRegressor,
    cache: &ForwardCache,
    loss_gradient: f64,
) -> Result<BiGruWeights, NeuralError> {
    let (d, k) = (model.d(), model.k());
    if cache.d != d || cache.k != k || cache.pooling != model.pooling {
        return Err(NeuralError::StaleCache {
            cache_d: cache.d,
            cache_k: cache.k,
            d,
            k,
        });
    }
    let mut grads = BiGruWeights::zeros(d, k);
    grads.head_bias = loss_gradient;
    grads.head_weights = cache.head_input.iter().map(|h| h * loss_gradient).collect();
    if loss_gradient == 0.0 {
        return Ok(grads);
    }

    let d_concat: Vec<f64> = model
        .weights
        .head_weights
        .iter()
        .zip(&cache.mask_concat)
        .map(|(w, m)| loss_gradient * w * m)
        .collect();
    let d_forward: Vec<f64> = d_concat[..k]
        .iter()
        .zip(&cache.mask_forward)
        .map(|(g, m)| g * m)
        .collect();
    let d_backward: Vec<f64> = d_concat[k..]
        .iter()
        .zip(&cache.mask_backward)
        .map(|(g, m)| g * m)
        .collect();

    backprop_direction(
        &model.weights.forward,
        &mut grads.forward,
        cache.inputs.iter(),
        &cache.forward_steps,
        &d_forward,
        cache.pooling,
    );
    backprop_direction(
        &model.weights.backward,
        &mut grads.backward,
        cache.inputs.iter().rev(),
        &cache.backward_steps,
        &d_backward,
        cache.pooling,
    );
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{smooth_l1, smooth_l1_grad};

    fn random_seq(t: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded(seed);
        (0..t)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_model_predicts_bias() {
        let mut m = BiGruRegressor::zeros(5, 4);
        m.weights.head_bias = 3.25;
        let p = m.predict(&random_seq(6, 5, 1)).unwrap();
        assert_eq!(p, 3.25);
    }

    #[test]
    fn length_one_sequence_shares_timestep() {
        let m = BiGruRegressor::init(3, 2, 9);
        let seq = random_seq(1, 3, 2);
        let (_, cache) = m.forward(&seq, ForwardMode::Inference).unwrap();
        assert_eq!(cache.forward_steps.len(), 1);
        assert_eq!(cache.backward_steps.len(), 1);
        let hf = crate::neural::gru_cell_forward(&m.weights.forward, &seq[0], &[0.0; 2]).unwrap();
        let hb = crate::neural::gru_cell_forward(&m.weights.backward, &seq[0], &[0.0; 2]).unwrap();
        assert_eq!(cache.head_input(), [hf, hb].concat().as_slice());
    }

    #[test]
    fn representation_width() {
        let m = BiGruRegressor::init(136, 64, 0);
        let (_, cache) = m.forward(&random_seq(3, 136, 0), ForwardMode::Inference).unwrap();
        assert_eq!(cache.head_input().len(), 128);
        assert_eq!(m.param_count(), 77_313);
    }

    #[test]
    fn errors() {
        let m = BiGruRegressor::init(3, 2, 0);
        assert_eq!(m.forward(&[], ForwardMode::Inference).unwrap_err(), NeuralError::EmptySequence);
        assert!(matches!(
            m.forward(&[vec![0.0; 4]], ForwardMode::Inference),
            Err(NeuralError::DimensionMismatch { expected: 3, found: 4 })
        ));
        let other = BiGruRegressor::init(4, 2, 0);
        let (_, cache) = other.forward(&[vec![0.0; 4]], ForwardMode::Inference).unwrap();
        assert!(matches!(backward(&m, &cache, 1.0), Err(NeuralError::StaleCache { .. })));
    }

    #[test]
    fn zero_loss_gradient_gives_zero_grads() {
        let m = BiGruRegressor::init(4, 3, 1);
        let (_, cache) = m
            .forward(&random_seq(5, 4, 1), ForwardMode::Training { seed: 4 })
            .unwrap();
        let g = backward(&m, &cache, 0.0).unwrap();
        assert!(g.slices().iter().all(|s| s.iter().all(|&v| v == 0.0)));
        let g = backward(&m, &cache, -0.7).unwrap();
        assert_eq!(g.head_bias, -0.7);
    }

    #[test]
    fn inference_is_deterministic_and_bounded() {
        let m = BiGruRegressor::init(6, 5, 3);
        let seq = random_seq(40, 6, 3);
        let (a, cache) = m.forward(&seq, ForwardMode::Inference).unwrap();
        let (b, _) = m.forward(&seq, ForwardMode::Inference).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        for h in cache.forward_states().chain(cache.backward_states()) {
            assert!(h.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    /// Finite-difference check over every parameter, with dropout active.
    fn grad_check(seed: u64, pooling: Pooling) {
        let (d, k, t) = (4, 3, 5);
        let mut model = BiGruRegressor::init(d, k, seed);
        model.pooling = pooling;
        let mut rng = seeded(seed ^ 0xABCD);
        for p in model.weights.slices_mut() {
            p.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
        }
        let seq = random_seq(t, d, seed + 100);
        let target = 0.3;
        let mode = ForwardMode::Training { seed: seed + 7 };
        let loss = |m: &BiGruRegressor| {
            let (p, _) = m.forward(&seq, mode).unwrap();
            smooth_l1(p, target)
        };
        let (pred, cache) = model.forward(&seq, mode).unwrap();
        let grads = backward(&model, &cache, smooth_l1_grad(pred, target)).unwrap();

        let h = 1e-5;
        let analytic: Vec<f64> = grads.slices().iter().flat_map(|s| s.to_vec()).collect();
        let mut idx = 0;
        let mut probe = model.clone();
        let blocks = probe.weights.slices().iter().map(|s| s.len()).collect::<Vec<_>>();
        for (b, len) in blocks.iter().enumerate() {
            for i in 0..*len {
                let orig = probe.weights.slices()[b][i];
                probe.weights.slices_mut()[b][i] = orig + h;
                let up = loss(&probe);
                probe.weights.slices_mut()[b][i] = orig - h;
                let down = loss(&probe);
                probe.weights.slices_mut()[b][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "block {b} index {i}: analytic {a} numeric {numeric}");
                idx += 1;
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        grad_check(11, Pooling::FinalState);
        grad_check(12, Pooling::MeanOverTime);
    }
}
