use serde::{Deserialize, Serialize};

use super::{BiGruWeights, NeuralError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators shaped like the parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    /// Zeroed moments shaped like `blocks`.
    pub fn for_blocks(blocks: &[&[f64]], config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.len()]).collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    pub fn for_weights(weights: &BiGruWeights, config: AdamConfig) -> Self {
        Self::for_blocks(&weights.slices(), config)
    }

    /// Bias-corrected update of `params` in block order, then element order.
    pub fn apply(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<(), NeuralError> {
        let shapes_match = params.len() == grads.len()
            && params.len() == self.first_moment.len()
            && params
                .iter()
                .zip(&grads)
                .zip(&self.first_moment)
                .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
        if !shapes_match {
            return Err(NeuralError::ShapeMismatch);
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// One Adam step on a regressor's weights.
pub fn adam_step(
    params: &mut BiGruWeights,
    gradients: &BiGruWeights,
    state: &mut AdamState,
) -> Result<(), NeuralError> {
    if !params.same_shape(gradients) {
        return Err(NeuralError::ShapeMismatch);
    }
    state.apply(params.slices_mut(), gradients.slices())
}
