//! From-scratch gated recurrent machinery.
//!
//! Gate equations (Cho et al. style):
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h̃  = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```

mod adam;
mod bigru;
mod loss;
mod serialize;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use bigru::{
    backward, BiGruRegressor, BiGruWeights, ForwardCache, ForwardMode, Pooling,
    DEFAULT_HIDDEN_DROPOUT, DEFAULT_INPUT_DROPOUT,
};
pub use loss::{smooth_l1, smooth_l1_grad};
pub use serialize::{AdamDoc, RegressorDocument, WeightsDoc, FORMAT_VERSION};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("cache does not match the model (d={cache_d}, k={cache_k} vs d={d}, k={k})")]
    StaleCache {
        cache_d: usize,
        cache_k: usize,
        d: usize,
        k: usize,
    },
    #[error("parameter shapes disagree")]
    ShapeMismatch,
    #[error("unsupported model format_version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed model document: {0}")]
    Malformed(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NeuralError> {
        if data.len() != rows * cols {
            return Err(NeuralError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let bound = xavier_bound(cols, rows);
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.random_range(-bound..=bound))
                .collect(),
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self · x`
    #[inline]
    pub(crate) fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · y`
    #[inline]
    pub(crate) fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += yi * w;
                }
            }
        }
    }

    /// `self += a ⊗ b`
    #[inline]
    pub(crate) fn outer_add(&mut self, a: &[f64], b: &[f64]) {
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ai != 0.0 {
                for (w, bj) in row.iter_mut().zip(b) {
                    *w += ai * bj;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub const GATE_Z: usize = 0;
pub const GATE_R: usize = 1;
pub const GATE_H: usize = 2;

/// Weights of one GRU cell; gate order is update (z), reset (r), candidate (h̃).
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub d: usize,
    pub k: usize,
    pub w: [Matrix; 3],
    pub u: [Matrix; 3],
    pub b: [Vec<f64>; 3],
}

impl GruParams {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            w: std::array::from_fn(|_| Matrix::zeros(k, d)),
            u: std::array::from_fn(|_| Matrix::zeros(k, k)),
            b: std::array::from_fn(|_| vec![0.0; k]),
        }
    }

    /// Xavier-uniform weights, zero biases. Draw order: W_z, W_r, W_h, U_z, U_r, U_h.
    pub fn init(d: usize, k: usize, rng: &mut impl Rng) -> Self {
        let w = std::array::from_fn(|_| Matrix::xavier(k, d, rng));
        let u = std::array::from_fn(|_| Matrix::xavier(k, k, rng));
        Self {
            d,
            k,
            w,
            u,
            b: std::array::from_fn(|_| vec![0.0; k]),
        }
    }

    pub fn param_count(&self) -> usize {
        3 * (self.k * self.d + self.k * self.k + self.k)
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(9);
        out.extend(self.w.iter().map(|m| m.data.as_slice()));
        out.extend(self.u.iter().map(|m| m.data.as_slice()));
        out.extend(self.b.iter().map(Vec::as_slice));
        out
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(9);
        out.extend(self.w.iter_mut().map(|m| m.data.as_mut_slice()));
        out.extend(self.u.iter_mut().map(|m| m.data.as_mut_slice()));
        out.extend(self.b.iter_mut().map(Vec::as_mut_slice));
        out
    }
}

/// Gate activations of one step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn gru_step(params: &GruParams, x: &[f64], h_prev: &[f64]) -> GruStep {
    let k = params.k;
    let mut z = params.b[GATE_Z].clone();
    let mut r = params.b[GATE_R].clone();
    params.w[GATE_Z].matvec_add(x, &mut z);
    params.u[GATE_Z].matvec_add(h_prev, &mut z);
    params.w[GATE_R].matvec_add(x, &mut r);
    params.u[GATE_R].matvec_add(h_prev, &mut r);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut candidate = params.b[GATE_H].clone();
    params.w[GATE_H].matvec_add(x, &mut candidate);
    params.u[GATE_H].matvec_add(&rh, &mut candidate);
    candidate.iter_mut().for_each(|v| *v = v.tanh());

    let h = (0..k)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
        .collect();
    GruStep { z, r, candidate, h }
}

/// One GRU step: returns the next hidden state.
pub fn gru_cell_forward(
    params: &GruParams,
    x_t: &[f64],
    h_prev: &[f64],
) -> Result<Vec<f64>, NeuralError> {
    if x_t.len() != params.d {
        return Err(NeuralError::DimensionMismatch {
            expected: params.d,
            found: x_t.len(),
        });
    }
    if h_prev.len() != params.k {
        return Err(NeuralError::DimensionMismatch {
            expected: params.k,
            found: h_prev.len(),
        });
    }
    Ok(gru_step(params, x_t, h_prev).h)
}
