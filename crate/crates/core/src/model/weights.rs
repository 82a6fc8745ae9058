//! Weight storage and the tensor-name layout of the bundle file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::bundle;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::ModelConfig;

/// Weights for one transformer layer. Projections are row-major
/// `[out_dim x in_dim]`, applied as `out = W x`.
#[derive(Debug, Clone)]
pub struct LayerWeights {
    pub attn_norm: Vec<f32>,
    pub wq: Vec<f32>,
    pub wk: Vec<f32>,
    pub wv: Vec<f32>,
    pub wo: Vec<f32>,
    pub ffn_norm: Vec<f32>,
    pub w_gate: Vec<f32>,
    pub w_up: Vec<f32>,
    pub w_down: Vec<f32>,
}

/// All model parameters, widened to f32. Immutable after load.
#[derive(Debug, Clone)]
pub struct WeightStore {
    /// `[vocab_size x hidden_size]`
    pub tok_embeddings: Vec<f32>,
    pub layers: Vec<LayerWeights>,
    pub final_norm: Vec<f32>,
    /// Unembedding matrix `[vocab_size x hidden_size]`; logits are its rows
    /// dotted with the normalized final hidden state.
    pub unembed: Vec<f32>,
}

impl WeightStore {
    /// Row of the unembedding matrix for one token.
    pub fn unembed_row(&self, token: usize, hidden_size: usize) -> &[f32] {
        &self.unembed[token * hidden_size..(token + 1) * hidden_size]
    }

    pub fn embedding_row(&self, token: usize, hidden_size: usize) -> &[f32] {
        &self.tok_embeddings[token * hidden_size..(token + 1) * hidden_size]
    }

    pub(crate) fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let h = config.hidden_size;
        let f = config.ffn_hidden;
        let v = config.vocab_size;
        let check = |name: &str, len: usize, expected: usize| -> Result<()> {
            if len != expected {
                return Err(Error::ShapeMismatch {
                    name: name.to_string(),
                    expected: vec![expected],
                    got: vec![len],
                });
            }
            Ok(())
        };
        check("tok_embeddings.weight", self.tok_embeddings.len(), v * h)?;
        check("norm.weight", self.final_norm.len(), h)?;
        check("output.weight", self.unembed.len(), v * h)?;
        if self.layers.len() != config.n_layers {
            return Err(Error::BadConfig(format!(
                "weight store has {} layers, config says {}",
                self.layers.len(),
                config.n_layers
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            check(&format!("layers.{i}.attention_norm.weight"), layer.attn_norm.len(), h)?;
            check(&format!("layers.{i}.attention.wq.weight"), layer.wq.len(), h * h)?;
            check(&format!("layers.{i}.attention.wk.weight"), layer.wk.len(), h * h)?;
            check(&format!("layers.{i}.attention.wv.weight"), layer.wv.len(), h * h)?;
            check(&format!("layers.{i}.attention.wo.weight"), layer.wo.len(), h * h)?;
            check(&format!("layers.{i}.ffn_norm.weight"), layer.ffn_norm.len(), h)?;
            check(&format!("layers.{i}.feed_forward.w_gate.weight"), layer.w_gate.len(), f * h)?;
            check(&format!("layers.{i}.feed_forward.w_up.weight"), layer.w_up.len(), f * h)?;
            check(&format!("layers.{i}.feed_forward.w_down.weight"), layer.w_down.len(), h * f)?;
        }
        Ok(())
    }
}

/// Expected tensor names and shapes for a config, in bundle order.
fn expected_tensors(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let h = config.hidden_size;
    let f = config.ffn_hidden;
    let v = config.vocab_size;
    let mut names = vec![
        ("tok_embeddings.weight".to_string(), vec![v, h]),
        ("norm.weight".to_string(), vec![h]),
        ("output.weight".to_string(), vec![v, h]),
    ];
    for i in 0..config.n_layers {
        names.push((format!("layers.{i}.attention_norm.weight"), vec![h]));
        names.push((format!("layers.{i}.attention.wq.weight"), vec![h, h]));
        names.push((format!("layers.{i}.attention.wk.weight"), vec![h, h]));
        names.push((format!("layers.{i}.attention.wv.weight"), vec![h, h]));
        names.push((format!("layers.{i}.attention.wo.weight"), vec![h, h]));
        names.push((format!("layers.{i}.ffn_norm.weight"), vec![h]));
        names.push((format!("layers.{i}.feed_forward.w_gate.weight"), vec![f, h]));
        names.push((format!("layers.{i}.feed_forward.w_up.weight"), vec![f, h]));
        names.push((format!("layers.{i}.feed_forward.w_down.weight"), vec![h, f]));
    }
    names
}

/// Load the config JSON and weight bundle, checking presence, shape, and
/// finiteness of every tensor the config names.
pub fn load_model(config_path: &Path, weights_path: &Path) -> Result<(ModelConfig, WeightStore)> {
    let config = ModelConfig::from_file(config_path)?;
    let mut tensors = bundle::read_bundle(weights_path)?;

    let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
        let tensor = tensors
            .remove(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        tensor.expect_shape(name, shape)?;
        Ok(tensor.data)
    };

    let h = config.hidden_size;
    let f = config.ffn_hidden;
    let v = config.vocab_size;

    let tok_embeddings = take("tok_embeddings.weight", &[v, h])?;
    let final_norm = take("norm.weight", &[h])?;
    let unembed = take("output.weight", &[v, h])?;
    let mut layers = Vec::with_capacity(config.n_layers);
    for i in 0..config.n_layers {
        layers.push(LayerWeights {
            attn_norm: take(&format!("layers.{i}.attention_norm.weight"), &[h])?,
            wq: take(&format!("layers.{i}.attention.wq.weight"), &[h, h])?,
            wk: take(&format!("layers.{i}.attention.wk.weight"), &[h, h])?,
            wv: take(&format!("layers.{i}.attention.wv.weight"), &[h, h])?,
            wo: take(&format!("layers.{i}.attention.wo.weight"), &[h, h])?,
            ffn_norm: take(&format!("layers.{i}.ffn_norm.weight"), &[h])?,
            w_gate: take(&format!("layers.{i}.feed_forward.w_gate.weight"), &[f, h])?,
            w_up: take(&format!("layers.{i}.feed_forward.w_up.weight"), &[f, h])?,
            w_down: take(&format!("layers.{i}.feed_forward.w_down.weight"), &[h, f])?,
        });
    }

    Ok((config, WeightStore { tok_embeddings, layers, final_norm, unembed }))
}

/// Save a (config, weights) pair: the bundle next to its config JSON.
pub fn save_model(
    config_path: &Path,
    weights_path: &Path,
    config: &ModelConfig,
    weights: &WeightStore,
) -> Result<()> {
    config.validate()?;
    weights.check_shapes(config)?;
    config.to_file(config_path)?;

    let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
    let mut put = |name: String, shape: Vec<usize>, data: &[f32]| {
        tensors.insert(name, Tensor::new(shape, data.to_vec()));
    };
    for (name, shape) in expected_tensors(config) {
        let data: &[f32] = match name.as_str() {
            "tok_embeddings.weight" => &weights.tok_embeddings,
            "norm.weight" => &weights.final_norm,
            "output.weight" => &weights.unembed,
            other => {
                let rest = other.strip_prefix("layers.").expect("layer tensor");
                let (idx, field) = rest.split_once('.').expect("layer tensor name");
                let layer = &weights.layers[idx.parse::<usize>().expect("layer index")];
                match field {
                    "attention_norm.weight" => &layer.attn_norm,
                    "attention.wq.weight" => &layer.wq,
                    "attention.wk.weight" => &layer.wk,
                    "attention.wv.weight" => &layer.wv,
                    "attention.wo.weight" => &layer.wo,
                    "ffn_norm.weight" => &layer.ffn_norm,
                    "feed_forward.w_gate.weight" => &layer.w_gate,
                    "feed_forward.w_up.weight" => &layer.w_up,
                    "feed_forward.w_down.weight" => &layer.w_down,
                    _ => unreachable!("unexpected tensor name {other}"),
                }
            }
        };
        put(name, shape, data);
    }
    bundle::write_bundle_f32(weights_path, &tensors)
}
