//! Independent reference implementations used to cross-check the analysis
//! code, plus the self-check suite the CLI exposes.
//!
//! These deliberately take different routes from the production code: the
//! PCA oracle runs a dense symmetric eigendecomposition where the
//! implementation uses power iteration, and the t-tail oracle goes through
//! an independently authored incomplete-beta routine.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::intervention::effect_size;
use crate::model::Engine;
use crate::probe::{build_inputs, ProbeOptions};
use crate::stats::student_t_sf;
use crate::synth;
use crate::tokenizer::ByteTokenizer;

/// Top eigenpair of the mean-centered sample covariance (n-1 denominator),
/// via a dense symmetric eigendecomposition.
///
/// The direction's sign follows the same rule as the power-iteration path:
/// non-negative mean projection of the source vectors.
pub fn dense_top_eigen(vectors: &[Vec<f32>]) -> (Vec<f64>, f64) {
    let n = vectors.len();
    let h = vectors[0].len();
    assert!(n >= 2, "need at least two vectors");

    let mut mean = vec![0.0f64; h];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += f64::from(x);
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(h, h);
    for v in vectors {
        let centered: Vec<f64> = v.iter().zip(&mean).map(|(&x, m)| f64::from(x) - m).collect();
        for i in 0..h {
            for j in 0..h {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    cov /= (n - 1) as f64;

    let eigen = nalgebra::SymmetricEigen::new(cov);
    let mut best = 0;
    for i in 1..h {
        if eigen.eigenvalues[i] > eigen.eigenvalues[best] {
            best = i;
        }
    }
    let mut direction: Vec<f64> = eigen.eigenvectors.column(best).iter().copied().collect();
    let eigenvalue = eigen.eigenvalues[best];

    let mean_projection: f64 = mean.iter().zip(&direction).map(|(m, d)| m * d).sum();
    let flip = if mean_projection != 0.0 {
        mean_projection < 0.0
    } else {
        direction.iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0)
    };
    if flip {
        for d in direction.iter_mut() {
            *d = -*d;
        }
    }
    (direction, eigenvalue)
}

/// Student-t upper-tail probability via the statrs incomplete beta.
pub fn t_sf_oracle(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let ib = statrs::function::beta::beta_reg(df / 2.0, 0.5, x);
    if t >= 0.0 {
        ib / 2.0
    } else {
        1.0 - ib / 2.0
    }
}

/// Absolute cosine between two unit-ish vectors.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Outcome of one self-check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check_pca_against_eigensolver() -> CheckOutcome {
    use crate::directions::pca_first_component;
    use crate::rng::Xoshiro256StarStar;

    let mut worst_cos = 1.0f64;
    let mut worst_var = 0.0f64;
    for trial in 0..20u64 {
        let mut rng = Xoshiro256StarStar::new(0xC0FFEE + trial);
        let n = 3 + (rng.below(58) as usize);
        let h = 2 + (rng.below(31) as usize);
        let vectors: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..h).map(|_| (rng.uniform01() as f32) * 4.0 - 2.0).collect())
            .collect();
        let pca = match pca_first_component(&vectors) {
            Ok(p) => p,
            Err(e) => {
                return CheckOutcome {
                    name: "pca_vs_eigensolver",
                    passed: false,
                    detail: format!("trial {trial}: {e}"),
                }
            }
        };
        let (oracle_dir, oracle_val) = dense_top_eigen(&vectors);
        worst_cos = worst_cos.min(abs_cosine(&pca.direction, &oracle_dir));
        let rel = (pca.explained_variance - oracle_val).abs() / oracle_val.abs();
        worst_var = worst_var.max(rel);
    }
    CheckOutcome {
        name: "pca_vs_eigensolver",
        passed: worst_cos >= 1.0 - 1e-6 && worst_var <= 1e-6,
        detail: format!("worst |cos| = {worst_cos:.12}, worst eigenvalue rel err = {worst_var:.3e}"),
    }
}

fn check_t_sf_against_oracle() -> CheckOutcome {
    let mut worst = 0.0f64;
    for &df in &[1.0, 10.0, 816.0, 999.0] {
        for &t in &[0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0, 10.0, 20.0, 35.0, 50.0] {
            let ours = student_t_sf(t, df);
            let oracle = t_sf_oracle(t, df);
            let rel = if oracle == 0.0 {
                (ours - oracle).abs()
            } else {
                (ours - oracle).abs() / oracle.abs()
            };
            worst = worst.max(rel);
        }
    }
    CheckOutcome {
        name: "t_sf_vs_oracle",
        passed: worst <= 1e-10,
        detail: format!("worst relative difference = {worst:.3e}"),
    }
}

fn check_blocking_null_case() -> CheckOutcome {
    let engine = Engine::new(synth::tiny_model(7), Box::new(ByteTokenizer));
    let samples = synth::synthetic_samples(3, 11);
    let opts = ProbeOptions::default();
    let n_layers = engine.model.config.n_layers;

    for sample in &samples {
        let inputs = match build_inputs(sample, &opts, engine.tokenizer.as_ref()) {
            Ok(i) => i,
            Err(e) => {
                return CheckOutcome {
                    name: "blocking_null_case",
                    passed: false,
                    detail: format!("build_inputs: {e}"),
                }
            }
        };
        let null = effect_size(&engine, &inputs, n_layers);
        let full = effect_size(&engine, &inputs, 0);
        match (null, full) {
            (Ok(null), Ok(full)) => {
                if null.e_halluc != 0.0 || null.e_corr != 0.0 {
                    return CheckOutcome {
                        name: "blocking_null_case",
                        passed: false,
                        detail: format!(
                            "threshold n_layers left a residue: {} / {}",
                            null.e_halluc, null.e_corr
                        ),
                    };
                }
                if full.e_halluc <= 0.0 || full.e_corr <= 0.0 {
                    return CheckOutcome {
                        name: "blocking_null_case",
                        passed: false,
                        detail: "threshold 0 produced no effect".to_string(),
                    };
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                return CheckOutcome {
                    name: "blocking_null_case",
                    passed: false,
                    detail: format!("effect_size: {e}"),
                }
            }
        }
    }
    CheckOutcome {
        name: "blocking_null_case",
        passed: true,
        detail: "threshold=n_layers gives exactly 0, threshold=0 gives > 0".to_string(),
    }
}

fn check_blocked_edge_suppression() -> CheckOutcome {
    use crate::model::{AttentionBlockSpec, CaptureSpec, TokenSequence};

    let model = synth::tiny_model(23);
    let tokens = TokenSequence::new((0..24).map(|i| (40 + i) as u32).collect());
    let block = AttentionBlockSpec::new(1, 23, (4..=9).collect::<BTreeSet<_>>());
    let out = match model.forward(&tokens, &CaptureSpec::none().with_attention(), Some(&block)) {
        Ok(o) => o,
        Err(e) => {
            return CheckOutcome {
                name: "blocked_edge_suppression",
                passed: false,
                detail: format!("forward: {e}"),
            }
        }
    };
    let maps = out.attention.expect("attention maps requested");
    let mut worst = 0.0f32;
    for layer in 1..model.config.n_layers {
        for head in 0..model.config.n_heads {
            let row = maps.post_row(layer, head, 23);
            for key in 4..=9 {
                worst = worst.max(row[key]);
            }
        }
    }
    CheckOutcome {
        name: "blocked_edge_suppression",
        passed: f64::from(worst) <= 1e-10,
        detail: format!("max post-softmax weight on blocked edges = {worst:.3e}"),
    }
}

/// Run every internal oracle; the CLI's `selfcheck` prints one line per
/// outcome.
pub fn run_selfcheck() -> Vec<CheckOutcome> {
    vec![
        check_pca_against_eigensolver(),
        check_t_sf_against_oracle(),
        check_blocking_null_case(),
        check_blocked_edge_suppression(),
    ]
}
