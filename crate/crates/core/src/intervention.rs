//! Attention-blocking effect sizes, the layer sweep, and steered
//! generation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AttentionBlockSpec, CaptureSpec, Engine, SteeringSpec, TokenSequence};
use crate::probe::{build_inputs, BranchSpan, ProbeInputs, ProbeOptions, QASample, SkipReport};

/// Effect of blocking the last token's attention to the question segment:
/// L2 distance between each branch's final hidden state with and without
/// the block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSizeRecord {
    pub sample_id: String,
    pub layer_threshold: usize,
    pub e_halluc: f64,
    pub e_corr: f64,
    /// e_corr - e_halluc.
    pub difference: f64,
}

fn l2_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = f64::from(x) - f64::from(y);
        acc += d * d;
    }
    acc.sqrt()
}

/// Final hidden state of one branch, unblocked and with the question
/// segment blocked from the last token in layers >= `layer_threshold`.
fn branch_effect(
    engine: &Engine,
    tokens: &TokenSequence,
    span: &BranchSpan,
    layer_threshold: usize,
) -> Result<f64> {
    let last_layer = engine.last_layer();
    let last_pos = tokens.last_position();
    let capture = CaptureSpec::hidden_at([(last_layer, last_pos)]);

    let unblocked = engine.model.forward(tokens, &capture, None)?;
    let block = AttentionBlockSpec::new(
        layer_threshold,
        last_pos,
        (span.question_start..=span.question_end).collect::<BTreeSet<_>>(),
    );
    let blocked = engine.model.forward(tokens, &capture, Some(&block))?;

    Ok(l2_distance(
        &unblocked.trace.expect(last_layer, last_pos).values,
        &blocked.trace.expect(last_layer, last_pos).values,
    ))
}

/// Measure both branches of one sample under a single layer threshold.
pub fn effect_size(
    engine: &Engine,
    inputs: &ProbeInputs,
    layer_threshold: usize,
) -> Result<EffectSizeRecord> {
    let n_layers = engine.model.config.n_layers;
    if layer_threshold > n_layers {
        return Err(Error::InvalidArgument(format!(
            "layer_threshold {layer_threshold} exceeds n_layers {n_layers}"
        )));
    }
    let e_halluc = branch_effect(
        engine,
        &inputs.hallucinated_tokens,
        &inputs.hallucinated_span,
        layer_threshold,
    )?;
    let e_corr = branch_effect(
        engine,
        &inputs.correct_tokens,
        &inputs.correct_span,
        layer_threshold,
    )?;
    Ok(EffectSizeRecord {
        sample_id: inputs.sample_id.clone(),
        layer_threshold,
        e_halluc,
        e_corr,
        difference: e_corr - e_halluc,
    })
}

/// Default thresholds for a 32-layer model (layer indices start at zero).
pub const DEFAULT_SWEEP_THRESHOLDS: [usize; 7] = [0, 5, 10, 15, 20, 25, 30];

/// Mean effect-size difference at one threshold with a 95% normal
/// confidence half-width (1.96 * sd / sqrt(n)).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub layer_threshold: usize,
    pub mean_diff: f64,
    pub ci_halfwidth: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub entries: Vec<SweepEntry>,
    pub skipped: Vec<SkipReport>,
}

/// Run the effect-size measurement for every sample at every threshold.
///
/// Thresholds must be strictly increasing and each at most n_layers.
/// Over-length samples are skipped and reported. Samples are evaluated in
/// parallel; entries come back in threshold order.
pub fn layer_sweep(
    engine: &Engine,
    samples: &[QASample],
    thresholds: &[usize],
    opts: &ProbeOptions,
) -> Result<SweepOutcome> {
    let n_layers = engine.model.config.n_layers;
    if thresholds.is_empty() {
        return Err(Error::InvalidArgument("no thresholds given".into()));
    }
    for pair in thresholds.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidArgument(format!(
                "thresholds must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if let Some(&last) = thresholds.last() {
        if last > n_layers {
            return Err(Error::InvalidArgument(format!(
                "threshold {last} exceeds n_layers {n_layers}"
            )));
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyResult(0));
    }

    let max_len = engine.model.config.max_seq_len;
    enum Outcome {
        Diffs(Vec<f64>),
        Skip(SkipReport),
    }
    let per_sample: Vec<Result<Outcome>> = samples
        .par_iter()
        .map(|sample| {
            let inputs = build_inputs(sample, opts, engine.tokenizer.as_ref())?;
            if inputs.max_len() > max_len {
                return Ok(Outcome::Skip(SkipReport {
                    sample_id: sample.id.clone(),
                    reason: format!(
                        "input of {} tokens exceeds max_seq_len {max_len}",
                        inputs.max_len()
                    ),
                }));
            }
            let diffs = thresholds
                .iter()
                .map(|&t| effect_size(engine, &inputs, t).map(|r| r.difference))
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome::Diffs(diffs))
        })
        .collect();

    let mut skipped = Vec::new();
    let mut per_threshold: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
    for outcome in per_sample {
        match outcome? {
            Outcome::Diffs(diffs) => {
                for (bucket, diff) in per_threshold.iter_mut().zip(diffs) {
                    bucket.push(diff);
                }
            }
            Outcome::Skip(report) => skipped.push(report),
        }
    }
    if per_threshold[0].is_empty() {
        return Err(Error::EmptyResult(samples.len()));
    }

    let entries = thresholds
        .iter()
        .zip(&per_threshold)
        .map(|(&threshold, diffs)| {
            let n = diffs.len();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            let ci_halfwidth = if n < 2 {
                0.0
            } else {
                let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                    / (n - 1) as f64;
                1.96 * var.sqrt() / (n as f64).sqrt()
            };
            SweepEntry {
                layer_threshold: threshold,
                mean_diff: mean,
                ci_halfwidth,
                n,
            }
        })
        .collect();

    Ok(SweepOutcome { entries, skipped })
}

/// Unsteered and steered greedy continuations of one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct SteerOutcome {
    pub original: String,
    pub adjusted: String,
}

/// Generate twice from the same prompt: once plainly, once with
/// `alpha * direction` added to the final hidden state at every step.
pub fn steer_generate(
    engine: &Engine,
    prompt: &str,
    direction: &[f32],
    alpha: f32,
    max_new_tokens: usize,
) -> Result<SteerOutcome> {
    let ids = engine.tokenizer.encode(prompt)?;
    let prompt_tokens = TokenSequence::new(ids);
    let original = engine.model.generate(&prompt_tokens, max_new_tokens, None)?;
    let steering = SteeringSpec::with_alpha(direction.to_vec(), alpha);
    let adjusted = engine
        .model
        .generate(&prompt_tokens, max_new_tokens, Some(&steering))?;
    Ok(SteerOutcome {
        original: engine.tokenizer.decode(&original.ids),
        adjusted: engine.tokenizer.decode(&adjusted.ids),
    })
}

/// One line of the steering report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteerRecord {
    pub id: String,
    pub question: String,
    pub original: String,
    pub adjusted: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_answer: Option<String>,
}
