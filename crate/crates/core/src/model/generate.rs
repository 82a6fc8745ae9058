//! Greedy generation with a KV cache and optional steering of the final
//! hidden state.

use crate::error::{Error, Result};

use super::math;
use super::{Model, TokenSequence};

/// Additive steering applied at every generation step: the final hidden
/// state (last layer, last position, after the final RMS norm, before
/// unembedding) receives `alpha * vector` before logits are computed.
///
/// Because the offset enters after the final norm, the logit shift is
/// linear: `logits(steered) - logits(unsteered) = alpha * (U . vector)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSpec {
    pub vector: Vec<f32>,
    pub alpha: f32,
}

pub const DEFAULT_STEERING_ALPHA: f32 = 100.0;

impl SteeringSpec {
    pub fn new(vector: Vec<f32>) -> Self {
        Self {
            vector,
            alpha: DEFAULT_STEERING_ALPHA,
        }
    }

    pub fn with_alpha(vector: Vec<f32>, alpha: f32) -> Self {
        Self { vector, alpha }
    }
}

/// Incremental decoder state: cached keys and values per layer.
struct Decoder<'m> {
    model: &'m Model,
    k_cache: Vec<Vec<f32>>,
    v_cache: Vec<Vec<f32>>,
    next_position: usize,
}

impl<'m> Decoder<'m> {
    fn new(model: &'m Model) -> Self {
        let n_layers = model.config.n_layers;
        Self {
            model,
            k_cache: vec![Vec::new(); n_layers],
            v_cache: vec![Vec::new(); n_layers],
            next_position: 0,
        }
    }

    /// Feed one token and return its last-layer residual-stream output.
    ///
    /// Per-position arithmetic matches the full forward pass operation for
    /// operation, so incremental decoding is bitwise consistent with it.
    fn feed(&mut self, token: u32) -> Vec<f32> {
        let cfg = &self.model.config;
        let h = cfg.hidden_size;
        let n_heads = cfg.n_heads;
        let head_dim = cfg.head_dim;
        let pos = self.next_position;
        let scale = 1.0 / (head_dim as f32).sqrt();
        let (cos, sin) = math::rope_tables(pos, head_dim, cfg.rope_theta);

        let mut x = self.model.weights.embedding_row(token as usize, h).to_vec();
        for (layer_idx, layer) in self.model.weights.layers.iter().enumerate() {
            let normed = math::rms_norm(&x, &layer.attn_norm, cfg.norm_epsilon);
            let mut q = math::matvec(&layer.wq, &normed, h, h);
            let mut k = math::matvec(&layer.wk, &normed, h, h);
            let v = math::matvec(&layer.wv, &normed, h, h);
            math::apply_rope(&mut q, n_heads, head_dim, &cos, &sin);
            math::apply_rope(&mut k, n_heads, head_dim, &cos, &sin);
            self.k_cache[layer_idx].extend_from_slice(&k);
            self.v_cache[layer_idx].extend_from_slice(&v);

            let keys = &self.k_cache[layer_idx];
            let values = &self.v_cache[layer_idx];
            let mut head_mix = vec![0.0f32; h];
            for head in 0..n_heads {
                let qh = &q[head * head_dim..(head + 1) * head_dim];
                let mut scores: Vec<f32> = (0..=pos)
                    .map(|kpos| {
                        let kh = &keys[kpos * h + head * head_dim..kpos * h + (head + 1) * head_dim];
                        math::dot(qh, kh) * scale
                    })
                    .collect();
                math::softmax(&mut scores);
                for (kpos, &w) in scores.iter().enumerate() {
                    let vh = &values[kpos * h + head * head_dim..kpos * h + (head + 1) * head_dim];
                    let out = &mut head_mix[head * head_dim..(head + 1) * head_dim];
                    for (o, &vv) in out.iter_mut().zip(vh) {
                        *o += w * vv;
                    }
                }
            }
            let attn_out = math::matvec(&layer.wo, &head_mix, h, h);
            for (xi, &a) in x.iter_mut().zip(&attn_out) {
                *xi += a;
            }

            let normed = math::rms_norm(&x, &layer.ffn_norm, cfg.norm_epsilon);
            let gate = math::matvec(&layer.w_gate, &normed, cfg.ffn_hidden, h);
            let up = math::matvec(&layer.w_up, &normed, cfg.ffn_hidden, h);
            let act: Vec<f32> = gate
                .iter()
                .zip(&up)
                .map(|(&g, &u)| math::silu(g) * u)
                .collect();
            let down = math::matvec(&layer.w_down, &act, h, cfg.ffn_hidden);
            for (xi, &dn) in x.iter_mut().zip(&down) {
                *xi += dn;
            }
        }
        self.next_position += 1;
        x
    }
}

impl Model {
    /// Logits the next token would be sampled from, with steering applied
    /// if given. Identical to the first step of [`Model::generate`].
    pub fn next_token_logits(
        &self,
        prompt: &TokenSequence,
        steering: Option<&SteeringSpec>,
    ) -> Result<Vec<f32>> {
        if prompt.is_empty() {
            return Err(Error::EmptySequence);
        }
        if prompt.len() > self.config.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: prompt.len(),
                max: self.config.max_seq_len,
            });
        }
        for &id in &prompt.ids {
            if id as usize >= self.config.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab_size: self.config.vocab_size,
                });
            }
        }
        if let Some(spec) = steering {
            if spec.vector.len() != self.config.hidden_size {
                return Err(Error::BadSteeringSpec(format!(
                    "vector length {} != hidden_size {}",
                    spec.vector.len(),
                    self.config.hidden_size
                )));
            }
        }
        let mut decoder = Decoder::new(self);
        let mut last_hidden = Vec::new();
        for &id in &prompt.ids {
            last_hidden = decoder.feed(id);
        }
        Ok(self.output_logits(&last_hidden, steering))
    }

    fn output_logits(&self, hidden: &[f32], steering: Option<&SteeringSpec>) -> Vec<f32> {
        let cfg = &self.config;
        let mut normed = math::rms_norm(hidden, &self.weights.final_norm, cfg.norm_epsilon);
        if let Some(spec) = steering {
            for (n, &v) in normed.iter_mut().zip(&spec.vector) {
                *n += spec.alpha * v;
            }
        }
        math::matvec(&self.weights.unembed, &normed, cfg.vocab_size, cfg.hidden_size)
    }

    /// Greedy decoding: argmax over logits, ties broken by the lowest token
    /// id. Returns only the newly generated tokens.
    pub fn generate(
        &self,
        prompt: &TokenSequence,
        max_new_tokens: usize,
        steering: Option<&SteeringSpec>,
    ) -> Result<TokenSequence> {
        let cfg = &self.config;
        if prompt.is_empty() {
            return Err(Error::EmptySequence);
        }
        for &id in &prompt.ids {
            if id as usize >= cfg.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    vocab_size: cfg.vocab_size,
                });
            }
        }
        if max_new_tokens == 0 {
            return Err(Error::InvalidArgument("max_new_tokens must be >= 1".into()));
        }
        if prompt.len() + max_new_tokens > cfg.max_seq_len {
            return Err(Error::ContextOverflow {
                prompt: prompt.len(),
                new: max_new_tokens,
                max: cfg.max_seq_len,
            });
        }
        if let Some(spec) = steering {
            if spec.vector.len() != cfg.hidden_size {
                return Err(Error::BadSteeringSpec(format!(
                    "vector length {} != hidden_size {}",
                    spec.vector.len(),
                    cfg.hidden_size
                )));
            }
            if !spec.alpha.is_finite() {
                return Err(Error::BadSteeringSpec("alpha must be finite".into()));
            }
        }

        let mut decoder = Decoder::new(self);
        let mut last_hidden = Vec::new();
        for &id in &prompt.ids {
            last_hidden = decoder.feed(id);
        }

        let mut generated = Vec::with_capacity(max_new_tokens);
        for step in 0..max_new_tokens {
            let logits = self.output_logits(&last_hidden, steering);
            let next = math::argmax_lowest(&logits) as u32;
            generated.push(next);
            if step + 1 < max_new_tokens {
                last_hidden = decoder.feed(next);
            }
        }
        Ok(TokenSequence::new(generated))
    }
}
