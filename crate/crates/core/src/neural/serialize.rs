use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, BiGruRegressor, BiGruWeights, GruParams, Matrix, NeuralError, Pooling};

pub const FORMAT_VERSION: u32 = 1;

/// One GRU cell, matrices flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDoc {
    pub w_update: Vec<f64>,
    pub w_reset: Vec<f64>,
    pub w_candidate: Vec<f64>,
    pub u_update: Vec<f64>,
    pub u_reset: Vec<f64>,
    pub u_candidate: Vec<f64>,
    pub b_update: Vec<f64>,
    pub b_reset: Vec<f64>,
    pub b_candidate: Vec<f64>,
}

impl CellDoc {
    fn from_params(p: &GruParams) -> Self {
        let [wz, wr, wh] = p.w.clone().map(|m| m.data);
        let [uz, ur, uh] = p.u.clone().map(|m| m.data);
        let [bz, br, bh] = p.b.clone();
        Self {
            w_update: wz,
            w_reset: wr,
            w_candidate: wh,
            u_update: uz,
            u_reset: ur,
            u_candidate: uh,
            b_update: bz,
            b_reset: br,
            b_candidate: bh,
        }
    }

    fn to_params(&self, d: usize, k: usize) -> Result<GruParams, NeuralError> {
        let m = |rows, cols, v: &Vec<f64>| Matrix::from_vec(rows, cols, v.clone());
        let b = |v: &Vec<f64>| {
            if v.len() == k {
                Ok(v.clone())
            } else {
                Err(NeuralError::DimensionMismatch {
                    expected: k,
                    found: v.len(),
                })
            }
        };
        Ok(GruParams {
            d,
            k,
            w: [
                m(k, d, &self.w_update)?,
                m(k, d, &self.w_reset)?,
                m(k, d, &self.w_candidate)?,
            ],
            u: [
                m(k, k, &self.u_update)?,
                m(k, k, &self.u_reset)?,
                m(k, k, &self.u_candidate)?,
            ],
            b: [b(&self.b_update)?, b(&self.b_reset)?, b(&self.b_candidate)?],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub forward: CellDoc,
    pub backward: CellDoc,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl WeightsDoc {
    pub fn from_weights(w: &BiGruWeights) -> Self {
        Self {
            forward: CellDoc::from_params(&w.forward),
            backward: CellDoc::from_params(&w.backward),
            head_weights: w.head_weights.clone(),
            head_bias: w.head_bias,
        }
    }

    pub fn to_weights(&self, d: usize, k: usize) -> Result<BiGruWeights, NeuralError> {
        if self.head_weights.len() != 2 * k {
            return Err(NeuralError::DimensionMismatch {
                expected: 2 * k,
                found: self.head_weights.len(),
            });
        }
        Ok(BiGruWeights {
            forward: self.forward.to_params(d, k)?,
            backward: self.backward.to_params(d, k)?,
            head_weights: self.head_weights.clone(),
            head_bias: self.head_bias,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamDoc {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: WeightsDoc,
    pub second_moment: WeightsDoc,
}

/// Serialized regressor, optionally with its optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorDocument {
    pub format_version: u32,
    pub d: usize,
    pub k: usize,
    pub input_dropout_rate: f64,
    pub hidden_dropout_rate: f64,
    pub pooling: Pooling,
    pub weights: WeightsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<AdamDoc>,
}

fn moments_to_weights(blocks: &[Vec<f64>], d: usize, k: usize) -> Result<BiGruWeights, NeuralError> {
    let mut w = BiGruWeights::zeros(d, k);
    let mut dst = w.slices_mut();
    if dst.len() != blocks.len() {
        return Err(NeuralError::ShapeMismatch);
    }
    for (d, s) in dst.iter_mut().zip(blocks) {
        if d.len() != s.len() {
            return Err(NeuralError::ShapeMismatch);
        }
        d.copy_from_slice(s);
    }
    drop(dst);
    Ok(w)
}

fn weights_to_moments(w: &BiGruWeights) -> Vec<Vec<f64>> {
    w.slices().iter().map(|s| s.to_vec()).collect()
}

impl RegressorDocument {
    pub fn from_model(model: &BiGruRegressor, optimizer: Option<&AdamState>) -> Result<Self, NeuralError> {
        let (d, k) = (model.d(), model.k());
        let optimizer = optimizer
            .map(|s| -> Result<AdamDoc, NeuralError> {
                Ok(AdamDoc {
                    config: s.config,
                    step: s.step,
                    first_moment: WeightsDoc::from_weights(&moments_to_weights(&s.first_moment, d, k)?),
                    second_moment: WeightsDoc::from_weights(&moments_to_weights(&s.second_moment, d, k)?),
                })
            })
            .transpose()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            d,
            k,
            input_dropout_rate: model.input_dropout_rate,
            hidden_dropout_rate: model.hidden_dropout_rate,
            pooling: model.pooling,
            weights: WeightsDoc::from_weights(&model.weights),
            optimizer,
        })
    }

    pub fn to_model(&self) -> Result<(BiGruRegressor, Option<AdamState>), NeuralError> {
        if self.format_version != FORMAT_VERSION {
            return Err(NeuralError::UnsupportedVersion(self.format_version));
        }
        for rate in [self.input_dropout_rate, self.hidden_dropout_rate] {
            if !(0.0..1.0).contains(&rate) {
                return Err(NeuralError::Malformed(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        let weights = self.weights.to_weights(self.d, self.k)?;
        if !weights.all_finite() {
            return Err(NeuralError::Malformed("non-finite weight".into()));
        }
        let model = BiGruRegressor {
            weights,
            input_dropout_rate: self.input_dropout_rate,
            hidden_dropout_rate: self.hidden_dropout_rate,
            pooling: self.pooling,
        };
        let optimizer = self
            .optimizer
            .as_ref()
            .map(|o| -> Result<AdamState, NeuralError> {
                Ok(AdamState {
                    config: o.config,
                    step: o.step,
                    first_moment: weights_to_moments(&o.first_moment.to_weights(self.d, self.k)?),
                    second_moment: weights_to_moments(&o.second_moment.to_weights(self.d, self.k)?),
                })
            })
            .transpose()?;
        Ok((model, optimizer))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Parses and checks the version before anything else.
    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| NeuralError::Malformed(e.to_string()))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => return Err(NeuralError::UnsupportedVersion(v as u32)),
            None => return Err(NeuralError::Malformed("missing format_version".into())),
        }
        serde_json::from_value(raw).map_err(|e| NeuralError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{adam_step, backward, xavier_bound, ForwardMode};

    #[test]
    fn init_is_seeded_and_bounded() {
        let (d, k) = (136, 64);
        let a = BiGruRegressor::init(d, k, 42);
        let b = BiGruRegressor::init(d, k, 42);
        let c = BiGruRegressor::init(d, k, 43);
        let bits = |m: &BiGruRegressor| -> Vec<u64> {
            m.weights.slices().iter().flat_map(|s| s.iter().map(|v| v.to_bits())).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));

        for cell in [&a.weights.forward, &a.weights.backward] {
            assert!(cell.b.iter().all(|b| b.iter().all(|&v| v == 0.0)));
            let wb = xavier_bound(d, k);
            let ub = xavier_bound(k, k);
            assert!(cell.w.iter().all(|m| m.data.iter().all(|v| v.abs() <= wb)));
            assert!(cell.u.iter().all(|m| m.data.iter().all(|v| v.abs() <= ub)));
        }
        let hb = xavier_bound(2 * k, 1);
        assert!(a.weights.head_weights.iter().all(|v| v.abs() <= hb));
        assert_eq!(a.weights.head_bias, 0.0);
    }

    #[test]
    fn round_trip_preserves_bits() {
        let mut model = BiGruRegressor::init(5, 3, 8);
        model.pooling = Pooling::MeanOverTime;
        let seq: Vec<Vec<f64>> = (0..4).map(|t| vec![t as f64 * 0.1; 5]).collect();
        let mut state = AdamState::for_weights(&model.weights, AdamConfig::default());
        let (p, cache) = model.forward(&seq, ForwardMode::Training { seed: 1 }).unwrap();
        let g = backward(&model, &cache, p - 1.0).unwrap();
        adam_step(&mut model.weights, &g, &mut state).unwrap();

        let doc = RegressorDocument::from_model(&model, Some(&state)).unwrap();
        let text = doc.to_json();
        let back = RegressorDocument::from_json(&text).unwrap();
        let (m2, s2) = back.to_model().unwrap();
        assert_eq!(m2, model);
        assert_eq!(s2.unwrap(), state);
        assert_eq!(m2.predict(&seq).unwrap().to_bits(), model.predict(&seq).unwrap().to_bits());
    }

    #[test]
    fn rejects_other_versions_and_shapes() {
        let model = BiGruRegressor::init(2, 2, 0);
        let mut doc = RegressorDocument::from_model(&model, None).unwrap();
        doc.format_version = 7;
        assert_eq!(
            RegressorDocument::from_json(&doc.to_json()).unwrap_err(),
            NeuralError::UnsupportedVersion(7)
        );
        assert_eq!(doc.to_model().unwrap_err(), NeuralError::UnsupportedVersion(7));

        let mut doc = RegressorDocument::from_model(&model, None).unwrap();
        doc.weights.head_weights.pop();
        assert!(doc.to_model().is_err());
        assert!(matches!(
            RegressorDocument::from_json("{\"format_version\": 1}"),
            Err(NeuralError::Malformed(_))
        ));
    }
}
