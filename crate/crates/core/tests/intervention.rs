//! Effect-size measurements, the layer sweep, and steered generation.

use std::collections::BTreeSet;

use halo_core::intervention::{effect_size, layer_sweep, steer_generate};
use halo_core::probe::{build_inputs, ProbeOptions};
use halo_core::synth;
use halo_core::tokenizer::ByteTokenizer;
use halo_core::{AttentionBlockSpec, CaptureSpec, Engine, Error, ModelConfig};

fn engine(seed: u64) -> Engine {
    Engine::new(synth::tiny_model(seed), Box::new(ByteTokenizer))
}

#[test]
fn threshold_at_n_layers_gives_exact_zero() {
    let engine = engine(40);
    let n_layers = engine.model.config.n_layers;
    for qa in synth::synthetic_samples(5, 13) {
        let inputs = build_inputs(&qa, &ProbeOptions::default(), engine.tokenizer.as_ref()).unwrap();
        let record = effect_size(&engine, &inputs, n_layers).unwrap();
        assert_eq!(record.e_halluc, 0.0);
        assert_eq!(record.e_corr, 0.0);
        assert_eq!(record.difference, 0.0);
    }
}

#[test]
fn threshold_zero_gives_positive_effects() {
    let engine = engine(41);
    for qa in synth::synthetic_samples(5, 14) {
        let inputs = build_inputs(&qa, &ProbeOptions::default(), engine.tokenizer.as_ref()).unwrap();
        let record = effect_size(&engine, &inputs, 0).unwrap();
        assert!(record.e_halluc > 0.0, "sample {}", qa.id);
        assert!(record.e_corr > 0.0, "sample {}", qa.id);
        assert_eq!(record.difference, record.e_corr - record.e_halluc);
    }
}

/// Recompute one branch's effect from scratch: two independent forward
/// passes and a hand-rolled norm.
fn oracle_branch_effect(
    engine: &Engine,
    tokens: &halo_core::TokenSequence,
    question_range: (usize, usize),
    threshold: usize,
) -> f64 {
    let last_layer = engine.model.config.n_layers - 1;
    let last = tokens.len() - 1;
    let capture = CaptureSpec::hidden_at([(last_layer, last)]);
    let plain = engine.model.forward(tokens, &capture, None).unwrap();
    let block = AttentionBlockSpec::new(
        threshold,
        last,
        (question_range.0..=question_range.1).collect::<BTreeSet<_>>(),
    );
    let blocked = engine.model.forward(tokens, &capture, Some(&block)).unwrap();
    let a = &plain.trace.expect(last_layer, last).values;
    let b = &blocked.trace.expect(last_layer, last).values;
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        acc += (f64::from(x) - f64::from(y)).powi(2);
    }
    acc.sqrt()
}

#[test]
fn effect_sizes_match_independent_recomputation_bitwise() {
    let engine = engine(42);
    for qa in synth::synthetic_samples(3, 15) {
        let inputs = build_inputs(&qa, &ProbeOptions::default(), engine.tokenizer.as_ref()).unwrap();
        for threshold in [0usize, 2, 4] {
            let record = effect_size(&engine, &inputs, threshold).unwrap();
            let oracle_h = oracle_branch_effect(
                &engine,
                &inputs.hallucinated_tokens,
                (
                    inputs.hallucinated_span.question_start,
                    inputs.hallucinated_span.question_end,
                ),
                threshold,
            );
            let oracle_c = oracle_branch_effect(
                &engine,
                &inputs.correct_tokens,
                (
                    inputs.correct_span.question_start,
                    inputs.correct_span.question_end,
                ),
                threshold,
            );
            assert_eq!(record.e_halluc.to_bits(), oracle_h.to_bits());
            assert_eq!(record.e_corr.to_bits(), oracle_c.to_bits());
        }
    }
}

#[test]
fn branch_isolation_blocking_one_branch_leaves_the_other_alone() {
    // The correct branch's states come from its own forward passes; they
    // must be identical whether or not the hallucinated branch was blocked
    // in between.
    let engine = engine(43);
    let qa = &synth::synthetic_samples(1, 16)[0];
    let inputs = build_inputs(qa, &ProbeOptions::default(), engine.tokenizer.as_ref()).unwrap();

    let solo_corr = oracle_branch_effect(
        &engine,
        &inputs.correct_tokens,
        (
            inputs.correct_span.question_start,
            inputs.correct_span.question_end,
        ),
        1,
    );
    let record = effect_size(&engine, &inputs, 1).unwrap();
    assert_eq!(record.e_corr.to_bits(), solo_corr.to_bits());
}

#[test]
fn sweep_with_degenerate_threshold_list() {
    let engine = engine(44);
    let n_layers = engine.model.config.n_layers;
    let samples = synth::synthetic_samples(4, 17);
    let outcome = layer_sweep(&engine, &samples, &[n_layers], &ProbeOptions::default()).unwrap();
    assert_eq!(outcome.entries.len(), 1);
    assert_eq!(outcome.entries[0].mean_diff, 0.0);
    assert_eq!(outcome.entries[0].ci_halfwidth, 0.0);
    assert_eq!(outcome.entries[0].n, 4);
}

#[test]
fn sweep_matches_per_sample_recomputation() {
    let engine = engine(45);
    let samples = synth::synthetic_samples(4, 18);
    let thresholds = [0usize, 2, 4];
    let outcome = layer_sweep(&engine, &samples, &thresholds, &ProbeOptions::default()).unwrap();
    assert_eq!(outcome.entries.len(), 3);

    for (i, &threshold) in thresholds.iter().enumerate() {
        let mut diffs = Vec::new();
        for qa in &samples {
            let inputs =
                build_inputs(qa, &ProbeOptions::default(), engine.tokenizer.as_ref()).unwrap();
            diffs.push(effect_size(&engine, &inputs, threshold).unwrap().difference);
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let half = 1.96 * var.sqrt() / n.sqrt();
        let entry = &outcome.entries[i];
        assert_eq!(entry.layer_threshold, threshold);
        assert!((entry.mean_diff - mean).abs() < 1e-15);
        assert!((entry.ci_halfwidth - half).abs() < 1e-15);
        assert_eq!(entry.n, 4);
    }
}

#[test]
fn sweep_default_thresholds_need_32_layers() {
    // A thin 32-layer model accepts the default threshold list and yields
    // one entry per threshold.
    let config = ModelConfig {
        n_layers: 32,
        hidden_size: 16,
        n_heads: 2,
        head_dim: 8,
        vocab_size: 256,
        ffn_hidden: 32,
        rope_theta: 10_000.0,
        norm_epsilon: 1e-5,
        max_seq_len: 256,
    };
    let weights = synth::random_weights(&config, 77);
    let model = halo_core::Model::new(config, weights).unwrap();
    let engine = Engine::new(model, Box::new(ByteTokenizer));
    let samples = synth::synthetic_samples(2, 19);
    let outcome = layer_sweep(
        &engine,
        &samples,
        &halo_core::intervention::DEFAULT_SWEEP_THRESHOLDS,
        &ProbeOptions::default(),
    )
    .unwrap();
    assert_eq!(outcome.entries.len(), 7);
    let listed: Vec<usize> = outcome.entries.iter().map(|e| e.layer_threshold).collect();
    assert_eq!(listed, vec![0, 5, 10, 15, 20, 25, 30]);
}

#[test]
fn sweep_validates_inputs() {
    let engine = engine(46);
    let samples = synth::synthetic_samples(2, 20);
    let opts = ProbeOptions::default();
    assert!(matches!(
        layer_sweep(&engine, &samples, &[2, 2], &opts),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        layer_sweep(&engine, &samples, &[0, 99], &opts),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        layer_sweep(&engine, &[], &[0], &opts),
        Err(Error::EmptyResult(0))
    ));
}

#[test]
fn steer_with_zero_alpha_leaves_output_unchanged() {
    let engine = engine(47);
    let h = engine.model.config.hidden_size;
    let direction = vec![1.0f32 / (h as f32).sqrt(); h];
    let outcome = steer_generate(
        &engine,
        "Question: where to?\nAnswer:",
        &direction,
        0.0,
        10,
    )
    .unwrap();
    assert_eq!(outcome.original, outcome.adjusted);
}

#[test]
fn steer_original_equals_plain_generation() {
    let engine = engine(48);
    let h = engine.model.config.hidden_size;
    let direction = vec![1.0f32 / (h as f32).sqrt(); h];
    let prompt = "Question: which key opens the second door?\nAnswer:";
    let outcome = steer_generate(&engine, prompt, &direction, 100.0, 8).unwrap();

    let ids = engine.tokenizer.encode(prompt).unwrap();
    let plain = engine
        .model
        .generate(&halo_core::TokenSequence::new(ids), 8, None)
        .unwrap();
    assert_eq!(outcome.original, engine.tokenizer.decode(&plain.ids));
    // A large alpha along a generic direction moves the output.
    assert_ne!(outcome.original, outcome.adjusted);
}
