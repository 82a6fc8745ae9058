//! Deterministic decoder-only transformer with hidden-state capture,
//! attention-edge blocking, and steered greedy generation.
//!
//! The architecture is fixed: RMS pre-normalization, rotary position
//! embeddings on query/key, gated SiLU feed-forward, no biases. All math
//! runs in f32 with fixed accumulation order, so identical inputs give
//! bitwise-identical outputs.

mod forward;
mod generate;
pub(crate) mod math;
mod weights;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::Tokenizer;

pub use forward::{ActivationTrace, AttentionBlockSpec, AttentionMaps, CaptureSpec, ForwardOutput};
pub use generate::SteeringSpec;
pub use weights::{load_model, save_model, LayerWeights, WeightStore};

/// Architecture hyperparameters, read from a JSON file with exactly these
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub hidden_size: usize,
    pub n_heads: usize,
    pub head_dim: usize,
    pub vocab_size: usize,
    pub ffn_hidden: usize,
    pub rope_theta: f64,
    pub norm_epsilon: f32,
    pub max_seq_len: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_layers", self.n_layers),
            ("hidden_size", self.hidden_size),
            ("n_heads", self.n_heads),
            ("head_dim", self.head_dim),
            ("vocab_size", self.vocab_size),
            ("ffn_hidden", self.ffn_hidden),
            ("max_seq_len", self.max_seq_len),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::BadConfig(format!("{name} must be >= 1")));
            }
        }
        if self.hidden_size != self.n_heads * self.head_dim {
            return Err(Error::BadConfig(format!(
                "hidden_size {} != n_heads {} * head_dim {}",
                self.hidden_size, self.n_heads, self.head_dim
            )));
        }
        if self.head_dim % 2 != 0 {
            return Err(Error::BadConfig(
                "head_dim must be even for rotary embeddings".into(),
            ));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(Error::BadConfig("norm_epsilon must be > 0".into()));
        }
        if !(self.rope_theta > 0.0) {
            return Err(Error::BadConfig("rope_theta must be > 0".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let config: ModelConfig =
            serde_json::from_slice(&bytes).map_err(|e| Error::BadConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("config serialization");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// An ordered list of token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Index of the last token.
    pub fn last_position(&self) -> usize {
        self.ids.len() - 1
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(ids: Vec<u32>) -> Self {
        Self { ids }
    }
}

/// One captured hidden state: the residual-stream output of `layer` at
/// `position`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub values: Vec<f32>,
    pub layer: usize,
    pub position: usize,
}

impl HiddenState {
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0f64, |acc, &v| acc + f64::from(v) * f64::from(v))
            .sqrt()
    }
}

/// A validated (config, weights) pair. Immutable after construction;
/// forward and generate take `&self` and may run concurrently.
pub struct Model {
    pub config: ModelConfig,
    pub weights: WeightStore,
}

impl Model {
    pub fn new(config: ModelConfig, weights: WeightStore) -> Result<Self> {
        config.validate()?;
        weights.check_shapes(&config)?;
        Ok(Self { config, weights })
    }

    pub fn load(config_path: &Path, weights_path: &Path) -> Result<Self> {
        let (config, weights) = load_model(config_path, weights_path)?;
        Ok(Self { config, weights })
    }

    pub(crate) fn check_tokens(&self, tokens: &TokenSequence) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if tokens.len() > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: tokens.len(),
                max: self.config.max_seq_len,
            });
        }
        for &id in &tokens.ids {
            if id as usize >= self.config.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab_size: self.config.vocab_size,
                });
            }
        }
        Ok(())
    }
}

/// Model plus tokenizer: everything the analysis modules need.
pub struct Engine {
    pub model: Model,
    pub tokenizer: Box<dyn Tokenizer>,
}

impl Engine {
    pub fn new(model: Model, tokenizer: Box<dyn Tokenizer>) -> Self {
        Self { model, tokenizer }
    }

    /// Load model and tokenizer from their file paths. A missing tokenizer
    /// path selects the byte-level tokenizer.
    pub fn load(
        config_path: &Path,
        weights_path: &Path,
        tokenizer_path: Option<&Path>,
    ) -> Result<Self> {
        let model = Model::load(config_path, weights_path)?;
        let tokenizer = crate::tokenizer::load_tokenizer(tokenizer_path)?;
        Ok(Self { model, tokenizer })
    }

    pub fn last_layer(&self) -> usize {
        self.model.config.n_layers - 1
    }
}
