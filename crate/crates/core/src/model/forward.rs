//! Full-sequence forward pass with hidden-state capture and attention-edge
//! blocking.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::math;
use super::{HiddenState, Model, TokenSequence};

/// Blocks causal attention edges from one query position to a set of
/// earlier key positions, in every layer at or above `layer_threshold`.
///
/// The mask value is added to the pre-softmax score in every head. The
/// default of -65504 drives the post-softmax weight to zero without
/// producing NaN on partially masked rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlockSpec {
    pub layer_threshold: usize,
    pub query_position: usize,
    pub key_positions: BTreeSet<usize>,
    pub mask_value: f32,
}

pub const DEFAULT_MASK_VALUE: f32 = -65_504.0;

impl AttentionBlockSpec {
    pub fn new(layer_threshold: usize, query_position: usize, key_positions: BTreeSet<usize>) -> Self {
        Self {
            layer_threshold,
            query_position,
            key_positions,
            mask_value: DEFAULT_MASK_VALUE,
        }
    }

    fn validate(&self, seq_len: usize, n_layers: usize) -> Result<()> {
        if !(self.mask_value < 0.0) {
            return Err(Error::BadBlockSpec(format!(
                "mask_value must be negative, got {}",
                self.mask_value
            )));
        }
        if self.layer_threshold > n_layers {
            return Err(Error::BadBlockSpec(format!(
                "layer_threshold {} exceeds n_layers {}",
                self.layer_threshold, n_layers
            )));
        }
        if self.query_position >= seq_len {
            return Err(Error::BadBlockSpec(format!(
                "query position {} out of range for sequence of length {seq_len}",
                self.query_position
            )));
        }
        for &key in &self.key_positions {
            if key >= self.query_position {
                return Err(Error::BadBlockSpec(format!(
                    "key position {key} is not strictly before query position {}; \
                     only causal edges can be blocked",
                    self.query_position
                )));
            }
        }
        Ok(())
    }
}

/// What to record during a forward pass.
#[derive(Debug, Clone, Default)]
pub struct CaptureSpec {
    /// (layer, position) pairs whose residual-stream output to keep.
    pub hidden: BTreeSet<(usize, usize)>,
    /// Keep pre- and post-softmax attention maps for every layer and head.
    pub attention: bool,
}

impl CaptureSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn hidden_at<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Self {
        Self {
            hidden: pairs.into_iter().collect(),
            attention: false,
        }
    }

    pub fn with_attention(mut self) -> Self {
        self.attention = true;
        self
    }
}

/// Captured hidden states, keyed by (layer, position). Contains exactly the
/// requested pairs.
#[derive(Debug, Clone, Default)]
pub struct ActivationTrace {
    captured: BTreeMap<(usize, usize), HiddenState>,
}

impl ActivationTrace {
    pub fn get(&self, layer: usize, position: usize) -> Option<&HiddenState> {
        self.captured.get(&(layer, position))
    }

    pub fn expect(&self, layer: usize, position: usize) -> &HiddenState {
        self.get(layer, position)
            .expect("requested capture pair missing from trace")
    }

    pub fn len(&self) -> usize {
        self.captured.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captured.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &HiddenState)> {
        self.captured.iter()
    }
}

/// Attention maps for every layer and head of one forward pass.
///
/// Row `m` of a map holds scores from query position `m` to key positions
/// `0..=m`. Pre-softmax entries above the diagonal are -inf, post-softmax
/// entries are 0.
#[derive(Debug, Clone)]
pub struct AttentionMaps {
    pub seq_len: usize,
    pre: Vec<Vec<Vec<f32>>>,
    post: Vec<Vec<Vec<f32>>>,
}

impl AttentionMaps {
    fn new(n_layers: usize, n_heads: usize, seq_len: usize) -> Self {
        let blank_pre = vec![vec![f32::NEG_INFINITY; seq_len * seq_len]; n_heads];
        let blank_post = vec![vec![0.0; seq_len * seq_len]; n_heads];
        Self {
            seq_len,
            pre: vec![blank_pre; n_layers],
            post: vec![blank_post; n_layers],
        }
    }

    /// Pre-softmax score row for (layer, head, query).
    pub fn pre_row(&self, layer: usize, head: usize, query: usize) -> &[f32] {
        &self.pre[layer][head][query * self.seq_len..(query + 1) * self.seq_len]
    }

    /// Post-softmax weight row for (layer, head, query).
    pub fn post_row(&self, layer: usize, head: usize, query: usize) -> &[f32] {
        &self.post[layer][head][query * self.seq_len..(query + 1) * self.seq_len]
    }

    pub fn n_layers(&self) -> usize {
        self.pre.len()
    }

    pub fn n_heads(&self) -> usize {
        self.pre.first().map_or(0, Vec::len)
    }
}

/// Everything a forward pass produces.
pub struct ForwardOutput {
    /// Row-major `[seq_len x vocab_size]` logits (after the final norm and
    /// unembedding) at every position.
    pub logits: Vec<f32>,
    pub trace: ActivationTrace,
    pub attention: Option<AttentionMaps>,
}

impl ForwardOutput {
    pub fn logits_at(&self, position: usize, vocab_size: usize) -> &[f32] {
        &self.logits[position * vocab_size..(position + 1) * vocab_size]
    }
}

impl Model {
    /// Run the full sequence through the model, recomputing from scratch.
    ///
    /// The hidden state at position `i` depends only on tokens `0..=i`, so
    /// sequences sharing a prefix produce bitwise-identical states at the
    /// shared positions. Identical inputs give bitwise-identical outputs.
    pub fn forward(
        &self,
        tokens: &TokenSequence,
        capture: &CaptureSpec,
        block: Option<&AttentionBlockSpec>,
    ) -> Result<ForwardOutput> {
        self.check_tokens(tokens)?;
        let cfg = &self.config;
        let d = tokens.len();
        let h = cfg.hidden_size;
        let n_heads = cfg.n_heads;
        let head_dim = cfg.head_dim;

        for &(layer, position) in &capture.hidden {
            if layer >= cfg.n_layers || position >= d {
                return Err(Error::CaptureOutOfRange { layer, position });
            }
        }
        if let Some(spec) = block {
            spec.validate(d, cfg.n_layers)?;
        }

        // Residual stream, row per position.
        let mut x: Vec<f32> = Vec::with_capacity(d * h);
        for &id in &tokens.ids {
            x.extend_from_slice(self.weights.embedding_row(id as usize, h));
        }

        let rope: Vec<(Vec<f32>, Vec<f32>)> = (0..d)
            .map(|pos| math::rope_tables(pos, head_dim, cfg.rope_theta))
            .collect();
        let scale = 1.0 / (head_dim as f32).sqrt();

        let mut maps = capture
            .attention
            .then(|| AttentionMaps::new(cfg.n_layers, n_heads, d));
        let mut trace = ActivationTrace::default();

        for (layer_idx, layer) in self.weights.layers.iter().enumerate() {
            // Attention sublayer.
            let mut q_all = Vec::with_capacity(d * h);
            let mut k_all = Vec::with_capacity(d * h);
            let mut v_all = Vec::with_capacity(d * h);
            for pos in 0..d {
                let normed = math::rms_norm(&x[pos * h..(pos + 1) * h], &layer.attn_norm, cfg.norm_epsilon);
                let mut q = math::matvec(&layer.wq, &normed, h, h);
                let mut k = math::matvec(&layer.wk, &normed, h, h);
                let v = math::matvec(&layer.wv, &normed, h, h);
                let (cos, sin) = &rope[pos];
                math::apply_rope(&mut q, n_heads, head_dim, cos, sin);
                math::apply_rope(&mut k, n_heads, head_dim, cos, sin);
                q_all.extend_from_slice(&q);
                k_all.extend_from_slice(&k);
                v_all.extend_from_slice(&v);
            }

            let blocking_here = block.filter(|b| layer_idx >= b.layer_threshold);

            for pos in 0..d {
                let mut head_mix = vec![0.0f32; h];
                for head in 0..n_heads {
                    let q = &q_all[pos * h + head * head_dim..pos * h + (head + 1) * head_dim];
                    let mut scores: Vec<f32> = (0..=pos)
                        .map(|kpos| {
                            let k = &k_all[kpos * h + head * head_dim..kpos * h + (head + 1) * head_dim];
                            math::dot(q, k) * scale
                        })
                        .collect();
                    if let Some(spec) = blocking_here {
                        if pos == spec.query_position {
                            for &kpos in &spec.key_positions {
                                scores[kpos] += spec.mask_value;
                            }
                        }
                    }
                    if let Some(maps) = maps.as_mut() {
                        maps.pre[layer_idx][head][pos * d..pos * d + pos + 1]
                            .copy_from_slice(&scores);
                    }
                    math::softmax(&mut scores);
                    if let Some(maps) = maps.as_mut() {
                        maps.post[layer_idx][head][pos * d..pos * d + pos + 1]
                            .copy_from_slice(&scores);
                    }
                    for (kpos, &w) in scores.iter().enumerate() {
                        let v = &v_all[kpos * h + head * head_dim..kpos * h + (head + 1) * head_dim];
                        let out = &mut head_mix[head * head_dim..(head + 1) * head_dim];
                        for (o, &vv) in out.iter_mut().zip(v) {
                            *o += w * vv;
                        }
                    }
                }
                let attn_out = math::matvec(&layer.wo, &head_mix, h, h);
                for (xi, &a) in x[pos * h..(pos + 1) * h].iter_mut().zip(&attn_out) {
                    *xi += a;
                }
            }

            // Feed-forward sublayer.
            for pos in 0..d {
                let normed = math::rms_norm(&x[pos * h..(pos + 1) * h], &layer.ffn_norm, cfg.norm_epsilon);
                let gate = math::matvec(&layer.w_gate, &normed, cfg.ffn_hidden, h);
                let up = math::matvec(&layer.w_up, &normed, cfg.ffn_hidden, h);
                let act: Vec<f32> = gate
                    .iter()
                    .zip(&up)
                    .map(|(&g, &u)| math::silu(g) * u)
                    .collect();
                let down = math::matvec(&layer.w_down, &act, h, cfg.ffn_hidden);
                for (xi, &dn) in x[pos * h..(pos + 1) * h].iter_mut().zip(&down) {
                    *xi += dn;
                }
            }

            for &(layer, position) in &capture.hidden {
                if layer == layer_idx {
                    trace.captured.insert(
                        (layer, position),
                        HiddenState {
                            values: x[position * h..(position + 1) * h].to_vec(),
                            layer,
                            position,
                        },
                    );
                }
            }
        }

        // Final norm and unembedding at every position.
        let v = cfg.vocab_size;
        let mut logits = Vec::with_capacity(d * v);
        for pos in 0..d {
            let normed = math::rms_norm(&x[pos * h..(pos + 1) * h], &self.weights.final_norm, cfg.norm_epsilon);
            logits.extend(math::matvec(&self.weights.unembed, &normed, v, h));
        }

        Ok(ForwardOutput {
            logits,
            trace,
            attention: maps,
        })
    }
}
