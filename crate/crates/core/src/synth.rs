//! Deterministic synthetic models and corpora for tests, benchmarks, and
//! the self-check command.

use crate::model::{LayerWeights, Model, ModelConfig, WeightStore};
use crate::probe::QASample;
use crate::rng::Xoshiro256StarStar;

/// Config used throughout the desk-scale checks: 4 layers, hidden 64,
/// byte-compatible vocabulary of 256.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        n_layers: 4,
        hidden_size: 64,
        n_heads: 4,
        head_dim: 16,
        vocab_size: 256,
        ffn_hidden: 128,
        rope_theta: 10_000.0,
        norm_epsilon: 1e-5,
        max_seq_len: 512,
    }
}

fn uniform_block(rng: &mut Xoshiro256StarStar, len: usize, scale: f32) -> Vec<f32> {
    (0..len)
        .map(|_| (rng.uniform01() as f32 * 2.0 - 1.0) * scale)
        .collect()
}

/// Random weights for a config, fully determined by the seed.
///
/// Projections are scaled by 1/sqrt(fan_in) and norm scales sit near 1 so
/// activations stay well-ranged through several layers.
pub fn random_weights(config: &ModelConfig, seed: u64) -> WeightStore {
    let mut rng = Xoshiro256StarStar::new(seed);
    let h = config.hidden_size;
    let f = config.ffn_hidden;
    let v = config.vocab_size;
    let proj_scale = 1.0 / (h as f32).sqrt();
    let ffn_scale = 1.0 / (f as f32).sqrt();

    let tok_embeddings = uniform_block(&mut rng, v * h, 0.5);
    let mut layers = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        layers.push(LayerWeights {
            attn_norm: (0..h).map(|_| 1.0 + (rng.uniform01() as f32 - 0.5) * 0.1).collect(),
            wq: uniform_block(&mut rng, h * h, proj_scale),
            wk: uniform_block(&mut rng, h * h, proj_scale),
            wv: uniform_block(&mut rng, h * h, proj_scale),
            wo: uniform_block(&mut rng, h * h, proj_scale),
            ffn_norm: (0..h).map(|_| 1.0 + (rng.uniform01() as f32 - 0.5) * 0.1).collect(),
            w_gate: uniform_block(&mut rng, f * h, proj_scale),
            w_up: uniform_block(&mut rng, f * h, proj_scale),
            w_down: uniform_block(&mut rng, h * f, ffn_scale),
        });
    }
    let final_norm = (0..h).map(|_| 1.0 + (rng.uniform01() as f32 - 0.5) * 0.1).collect();
    let unembed = uniform_block(&mut rng, v * h, 0.5);

    WeightStore {
        tok_embeddings,
        layers,
        final_norm,
        unembed,
    }
}

/// The standard tiny random model.
pub fn tiny_model(seed: u64) -> Model {
    let config = tiny_config();
    let weights = random_weights(&config, seed);
    Model::new(config, weights).expect("tiny model is valid")
}

/// A model whose unembedding rows are orthonormal (vocab_size ==
/// hidden_size), for steering-domination checks: steering along row `j`
/// with large alpha must emit token `j`.
pub fn orthonormal_unembed_model(seed: u64) -> Model {
    let config = ModelConfig {
        n_layers: 2,
        hidden_size: 32,
        n_heads: 2,
        head_dim: 16,
        vocab_size: 32,
        ffn_hidden: 64,
        rope_theta: 10_000.0,
        norm_epsilon: 1e-5,
        max_seq_len: 128,
    };
    let mut weights = random_weights(&config, seed);
    weights.unembed = orthonormal_rows(config.vocab_size, config.hidden_size, seed ^ 0xA5A5_5A5A);
    Model::new(config, weights).expect("orthonormal model is valid")
}

/// Random orthonormal rows via Gram-Schmidt in f64, rounded to f32.
fn orthonormal_rows(rows: usize, cols: usize, seed: u64) -> Vec<f32> {
    assert!(rows <= cols);
    let mut rng = Xoshiro256StarStar::new(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rows);
    while basis.len() < rows {
        let mut v: Vec<f64> = (0..cols).map(|_| rng.uniform01() * 2.0 - 1.0).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(v);
    }
    basis
        .into_iter()
        .flat_map(|row| row.into_iter().map(|v| v as f32))
        .collect()
}

/// Deterministic QA corpus in the shape the probe expects. Every other
/// sample carries knowledge; every third is flagged adversarial.
pub fn synthetic_samples(n: usize, seed: u64) -> Vec<QASample> {
    let mut rng = Xoshiro256StarStar::new(seed);
    let subjects = [
        "the river", "the archive", "the engine", "the treaty", "the comet",
        "the bridge", "the ledger", "the harbor", "the signal", "the garden",
    ];
    let answers = [
        "forty-two", "a closed loop", "nothing at all", "the northern route",
        "an old map", "three parts", "the second key", "a quiet year",
    ];
    (0..n)
        .map(|i| {
            let subject = subjects[rng.below(subjects.len() as u64) as usize];
            let correct = answers[rng.below(answers.len() as u64) as usize];
            let mut wrong = answers[rng.below(answers.len() as u64) as usize];
            if wrong == correct {
                wrong = answers[(answers.iter().position(|a| *a == correct).unwrap() + 1) % answers.len()];
            }
            QASample {
                id: format!("synth-{i:04}"),
                question: format!("What does {subject} number {i} point to?"),
                correct_answer: correct.to_string(),
                hallucinated_answer: wrong.to_string(),
                knowledge: (i % 2 == 0)
                    .then(|| format!("Record {i}: {subject} points to {correct}.")),
                adversarial: Some(i % 3 == 0),
            }
        })
        .collect()
}
