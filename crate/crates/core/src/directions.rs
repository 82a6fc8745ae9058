//! Transition vectors, PCA directions, vocabulary projection, and
//! per-sample projection scalars.
//!
//! The correct transition vector of a sample is s1 - s3 and the
//! hallucinated one is s1 - s2. The first principal component of each
//! population (fit by power iteration and checked against a dense
//! eigensolver in tests) gives the correct and hallucinated directions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::probe::HiddenTriple;
use crate::rng::Xoshiro256StarStar;
use crate::tensor::Tensor;
use crate::tokenizer::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Correct,
    Hallucinated,
}

/// Hidden-state change induced by one answer: exact componentwise f32
/// subtraction of the final state from the anchor state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionVector {
    pub sample_id: String,
    pub kind: TransitionKind,
    pub v: Vec<f32>,
}

/// Two vectors per triple: correct (s1 - s3) then hallucinated (s1 - s2).
pub fn transition_vectors(triples: &[HiddenTriple]) -> Vec<TransitionVector> {
    let mut out = Vec::with_capacity(triples.len() * 2);
    for triple in triples {
        let correct: Vec<f32> = triple
            .s1_corr
            .values
            .iter()
            .zip(&triple.s3.values)
            .map(|(&a, &b)| a - b)
            .collect();
        let hallucinated: Vec<f32> = triple
            .s1
            .values
            .iter()
            .zip(&triple.s2.values)
            .map(|(&a, &b)| a - b)
            .collect();
        out.push(TransitionVector {
            sample_id: triple.sample_id.clone(),
            kind: TransitionKind::Correct,
            v: correct,
        });
        out.push(TransitionVector {
            sample_id: triple.sample_id.clone(),
            kind: TransitionKind::Hallucinated,
            v: hallucinated,
        });
    }
    out
}

/// First principal component of a vector population.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Unit-norm direction (f64), sign fixed so the mean projection of the
    /// input vectors onto it is non-negative.
    pub direction: Vec<f64>,
    /// Eigenvalue of the sample covariance (n-1 denominator) along the
    /// direction.
    pub explained_variance: f64,
}

// Fixed seed for the power-iteration start vector; any value works, it only
// has to be deterministic.
const PCA_INIT_SEED: u64 = 0x5EED_D1F0_57A7_E000;
const PCA_TOLERANCE: f64 = 1e-10;
const PCA_MAX_ITERATIONS: usize = 10_000;

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot64(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Power iteration on the mean-centered sample covariance, applied
/// implicitly through the centered data matrix.
///
/// Converges when successive unit iterates differ by less than 1e-10 in
/// L2, capped at 10,000 iterations (the current iterate is returned at the
/// cap). Requires at least two vectors that are not all identical.
pub fn pca_first_component(vectors: &[Vec<f32>]) -> Result<PcaResult> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::TooFewValues { need: 2, got: n });
    }
    let h = vectors[0].len();
    for v in vectors {
        if v.len() != h {
            return Err(Error::BadVectorLength {
                expected: h,
                got: v.len(),
            });
        }
    }

    let mut mean = vec![0.0f64; h];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += f64::from(x);
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(&x, m)| f64::from(x) - m).collect())
        .collect();
    if centered
        .iter()
        .all(|row| row.iter().all(|&x| x == 0.0))
    {
        return Err(Error::DegenerateData(
            "all vectors identical after mean-centering".into(),
        ));
    }

    // C v = X_c^T (X_c v) / (n - 1), never forming the h x h covariance.
    let apply_cov = |v: &[f64]| -> Vec<f64> {
        let weights: Vec<f64> = centered.iter().map(|row| dot64(row, v)).collect();
        let mut out = vec![0.0f64; h];
        for (row, &w) in centered.iter().zip(&weights) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
        for o in out.iter_mut() {
            *o /= (n - 1) as f64;
        }
        out
    };

    let mut rng = Xoshiro256StarStar::new(PCA_INIT_SEED);
    let mut v: Vec<f64> = (0..h).map(|_| rng.uniform01() * 2.0 - 1.0).collect();
    normalize(&mut v);

    for _ in 0..PCA_MAX_ITERATIONS {
        let mut next = apply_cov(&v);
        if normalize(&mut next) == 0.0 {
            return Err(Error::DegenerateData(
                "iterate fell into the covariance null space".into(),
            ));
        }
        let delta: f64 = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if delta < PCA_TOLERANCE {
            break;
        }
    }

    // Rayleigh quotient of the converged unit iterate.
    let explained_variance = dot64(&v, &apply_cov(&v));

    // Sign rule: mean projection of the source vectors must be >= 0; an
    // exactly-zero mean projection falls back to the first nonzero
    // component being positive.
    let mean_projection = dot64(&mean, &v);
    let flip = if mean_projection != 0.0 {
        mean_projection < 0.0
    } else {
        v.iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0)
    };
    if flip {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
    normalize(&mut v);

    Ok(PcaResult {
        direction: v,
        explained_variance,
    })
}

/// The two fitted directions and their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionPair {
    pub d_corr: Vec<f64>,
    pub d_halluc: Vec<f64>,
    pub explained_variance_corr: f64,
    pub explained_variance_halluc: f64,
}

/// Fit both directions from a transition-vector population.
pub fn fit_directions(vectors: &[TransitionVector]) -> Result<DirectionPair> {
    let correct: Vec<Vec<f32>> = vectors
        .iter()
        .filter(|t| t.kind == TransitionKind::Correct)
        .map(|t| t.v.clone())
        .collect();
    let hallucinated: Vec<Vec<f32>> = vectors
        .iter()
        .filter(|t| t.kind == TransitionKind::Hallucinated)
        .map(|t| t.v.clone())
        .collect();
    let corr = pca_first_component(&correct)?;
    let halluc = pca_first_component(&hallucinated)?;
    Ok(DirectionPair {
        d_corr: corr.direction,
        d_halluc: halluc.direction,
        explained_variance_corr: corr.explained_variance,
        explained_variance_halluc: halluc.explained_variance,
    })
}

/// Scalar projections of one sample's transition vectors onto the fitted
/// directions. The directions are unit norm, so the scalar projection is a
/// plain dot product, accumulated left-to-right in f64 and rounded to f32.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRecord {
    pub sample_id: String,
    pub p_h: f32,
    pub p_c: f32,
}

fn project(v: &[f32], d: &[f64]) -> f32 {
    let mut acc = 0.0f64;
    for (&x, &dx) in v.iter().zip(d) {
        acc += f64::from(x) * dx;
    }
    acc as f32
}

/// One record per sample id, in first-seen order. Every sample must
/// contribute both kinds.
pub fn project_samples(
    vectors: &[TransitionVector],
    pair: &DirectionPair,
) -> Result<Vec<ProjectionRecord>> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: BTreeMap<&str, (Option<&TransitionVector>, Option<&TransitionVector>)> =
        BTreeMap::new();
    for t in vectors {
        let entry = grouped.entry(t.sample_id.as_str()).or_insert_with(|| {
            order.push(t.sample_id.as_str());
            (None, None)
        });
        match t.kind {
            TransitionKind::Correct => entry.0 = Some(t),
            TransitionKind::Hallucinated => entry.1 = Some(t),
        }
    }

    let mut records = Vec::with_capacity(order.len());
    for id in order {
        let (corr, halluc) = &grouped[id];
        let corr = corr.ok_or_else(|| Error::MissingTransition {
            id: id.to_string(),
            kind: "correct",
        })?;
        let halluc = halluc.ok_or_else(|| Error::MissingTransition {
            id: id.to_string(),
            kind: "hallucinated",
        })?;
        records.push(ProjectionRecord {
            sample_id: id.to_string(),
            p_h: project(&halluc.v, &pair.d_halluc),
            p_c: project(&corr.v, &pair.d_corr),
        });
    }
    Ok(records)
}

/// Tokens ranked by dot product with a direction, descending, ties broken
/// by the lowest token id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VocabProjection {
    pub ranked: Vec<(u32, String, f64)>,
}

/// Project a direction into vocabulary space: score every token by the dot
/// product of its unembedding row with the direction, and keep the top k.
pub fn vocab_project(
    direction: &[f64],
    model: &Model,
    tokenizer: &dyn Tokenizer,
    k: usize,
) -> Result<VocabProjection> {
    let h = model.config.hidden_size;
    let v = model.config.vocab_size;
    if direction.len() != h {
        return Err(Error::BadVectorLength {
            expected: h,
            got: direction.len(),
        });
    }
    if k > v {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds vocab_size {v}"
        )));
    }

    let mut scored: Vec<(u32, f64)> = (0..v)
        .map(|token| {
            let row = model.weights.unembed_row(token, h);
            let mut acc = 0.0f64;
            for (&w, &dx) in row.iter().zip(direction) {
                acc += f64::from(w) * dx;
            }
            (token as u32, acc)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);

    Ok(VocabProjection {
        ranked: scored
            .into_iter()
            .map(|(id, score)| (id, tokenizer.token_text(id), score))
            .collect(),
    })
}

/// JSON sidecar written next to the direction bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSidecar {
    pub explained_variance_corr: f64,
    pub explained_variance_halluc: f64,
    pub n_samples: usize,
    pub sign_convention: String,
}

pub const SIGN_CONVENTION: &str = "mean_projection_nonneg";

/// Write the direction pair as a bundle (`d_corr`, `d_halluc`, f32) plus
/// its JSON sidecar.
pub fn save_directions(
    bundle_path: &Path,
    sidecar_path: &Path,
    pair: &DirectionPair,
    n_samples: usize,
) -> Result<()> {
    let mut tensors = BTreeMap::new();
    let to_f32 = |v: &[f64]| -> Vec<f32> { v.iter().map(|&x| x as f32).collect() };
    tensors.insert(
        "d_corr".to_string(),
        Tensor::new(vec![pair.d_corr.len()], to_f32(&pair.d_corr)),
    );
    tensors.insert(
        "d_halluc".to_string(),
        Tensor::new(vec![pair.d_halluc.len()], to_f32(&pair.d_halluc)),
    );
    bundle::write_bundle_f32(bundle_path, &tensors)?;

    let sidecar = DirectionSidecar {
        explained_variance_corr: pair.explained_variance_corr,
        explained_variance_halluc: pair.explained_variance_halluc,
        n_samples,
        sign_convention: SIGN_CONVENTION.to_string(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialization");
    std::fs::write(sidecar_path, json).map_err(|e| Error::io(sidecar_path, e))
}

/// Read (d_corr, d_halluc) back from a direction bundle, as f32 vectors
/// ready for steering.
pub fn load_directions(bundle_path: &Path) -> Result<(Vec<f32>, Vec<f32>)> {
    let mut tensors = bundle::read_bundle(bundle_path)?;
    let mut take = |name: &str| -> Result<Vec<f32>> {
        let t = tensors
            .remove(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if t.shape.len() != 1 {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: vec![t.data.len()],
                got: t.shape.clone(),
            });
        }
        Ok(t.data)
    };
    Ok((take("d_corr")?, take("d_halluc")?))
}
