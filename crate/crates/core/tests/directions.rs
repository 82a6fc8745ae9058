//! PCA direction fitting against the dense-eigensolver oracle, projections,
//! and vocabulary ranking.

use halo_core::directions::{
    fit_directions, load_directions, pca_first_component, project_samples, save_directions,
    transition_vectors, DirectionPair, TransitionKind, TransitionVector,
};
use halo_core::rng::Xoshiro256StarStar;
use halo_core::synth;
use halo_core::tokenizer::ByteTokenizer;
use halo_core::validate::{abs_cosine, dense_top_eigen};
use halo_core::{Error, HiddenState, HiddenTriple};

fn state(values: Vec<f32>) -> HiddenState {
    HiddenState {
        values,
        layer: 3,
        position: 0,
    }
}

fn triple(id: &str, s1: Vec<f32>, s2: Vec<f32>, s3: Vec<f32>) -> HiddenTriple {
    HiddenTriple {
        sample_id: id.to_string(),
        s1: state(s1.clone()),
        s1_corr: state(s1),
        s2: state(s2),
        s3: state(s3),
    }
}

fn random_vectors(n: usize, h: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = Xoshiro256StarStar::new(seed);
    (0..n)
        .map(|_| (0..h).map(|_| (rng.uniform01() as f32) * 4.0 - 2.0).collect())
        .collect()
}

#[test]
fn transition_vector_arithmetic() {
    let t = triple("a", vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]);
    let vectors = transition_vectors(&[t]);
    assert_eq!(vectors.len(), 2);
    assert_eq!(vectors[0].kind, TransitionKind::Correct);
    assert_eq!(vectors[0].v, vec![0.0, 0.0]); // s1 == s3
    assert_eq!(vectors[1].kind, TransitionKind::Hallucinated);
    assert_eq!(vectors[1].v, vec![1.0, -1.0]);
}

#[test]
fn transition_round_trip_on_equal_exponent_values() {
    // s1 - (s1 - s3) == s3 exactly when the subtraction is exact, which
    // holds for same-magnitude values like these.
    let s1 = vec![1.5f32, -2.25, 3.0, 0.5];
    let s3 = vec![1.25f32, -2.5, 2.5, 0.75];
    let t = triple("a", s1.clone(), s1.clone(), s3.clone());
    let vectors = transition_vectors(&[t]);
    let v_corr = &vectors[0].v;
    let back: Vec<f32> = s1.iter().zip(v_corr).map(|(a, v)| a - v).collect();
    assert_eq!(back, s3);
}

#[test]
fn pca_two_point_example() {
    // {(0,0), (2,0)}: centered points (-1,0), (1,0); sample variance 2.0;
    // sign rule picks (+1, 0). Verified against the dense eigensolver.
    let vectors = vec![vec![0.0f32, 0.0], vec![2.0, 0.0]];
    let pca = pca_first_component(&vectors).unwrap();
    assert!((pca.direction[0] - 1.0).abs() < 1e-9);
    assert!(pca.direction[1].abs() < 1e-9);
    assert!((pca.explained_variance - 2.0).abs() < 1e-9);

    let (oracle_dir, oracle_val) = dense_top_eigen(&vectors);
    assert!(abs_cosine(&pca.direction, &oracle_dir) >= 1.0 - 1e-9);
    assert!((pca.explained_variance - oracle_val).abs() < 1e-9);
}

#[test]
fn pca_degenerate_inputs() {
    assert!(matches!(
        pca_first_component(&[vec![1.0f32, 2.0]]),
        Err(Error::TooFewValues { .. })
    ));
    assert!(matches!(
        pca_first_component(&vec![vec![3.0f32, -1.0]; 5]),
        Err(Error::DegenerateData(_))
    ));
    assert!(matches!(
        pca_first_component(&[vec![1.0f32, 2.0], vec![1.0, 2.0, 3.0]]),
        Err(Error::BadVectorLength { .. })
    ));
}

#[test]
fn pca_matches_dense_eigensolver_on_random_data() {
    for trial in 0..40u64 {
        let mut rng = Xoshiro256StarStar::new(9000 + trial);
        let n = 3 + rng.below(60) as usize;
        let h = 2 + rng.below(40) as usize;
        let vectors = random_vectors(n, h, 100 + trial);
        let pca = pca_first_component(&vectors).unwrap();
        let (oracle_dir, oracle_val) = dense_top_eigen(&vectors);
        let cos = abs_cosine(&pca.direction, &oracle_dir);
        assert!(
            cos >= 1.0 - 1e-6,
            "trial {trial} (n={n}, h={h}): |cos| = {cos}"
        );
        let rel = (pca.explained_variance - oracle_val).abs() / oracle_val;
        assert!(rel <= 1e-6, "trial {trial}: eigenvalue rel err {rel}");
    }
}

#[test]
fn pca_direction_is_unit_norm_with_nonnegative_mean_projection() {
    let vectors = random_vectors(50, 24, 4242);
    let pca = pca_first_component(&vectors).unwrap();
    let norm: f64 = pca.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() <= 1e-9);
    let mut mean_proj = 0.0f64;
    for v in &vectors {
        let mut dot = 0.0f64;
        for (&x, &d) in v.iter().zip(&pca.direction) {
            dot += f64::from(x) * d;
        }
        mean_proj += dot;
    }
    mean_proj /= vectors.len() as f64;
    assert!(mean_proj >= 0.0);
}

#[test]
fn pca_is_translation_invariant_up_to_sign() {
    let vectors = random_vectors(30, 12, 777);
    let base = pca_first_component(&vectors).unwrap();
    let shifted: Vec<Vec<f32>> = vectors
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, &x)| x + (i as f32) - 3.0).collect())
        .collect();
    let moved = pca_first_component(&shifted).unwrap();
    assert!(abs_cosine(&base.direction, &moved.direction) >= 1.0 - 1e-6);
    let rel = (base.explained_variance - moved.explained_variance).abs() / base.explained_variance;
    assert!(rel <= 1e-6);
}

#[test]
fn pca_scaling_scales_variance_quadratically() {
    let vectors = random_vectors(30, 12, 778);
    let base = pca_first_component(&vectors).unwrap();
    let c = 3.0f32;
    let scaled: Vec<Vec<f32>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| c * x).collect())
        .collect();
    let big = pca_first_component(&scaled).unwrap();
    assert!(abs_cosine(&base.direction, &big.direction) >= 1.0 - 1e-6);
    let rel = (big.explained_variance - f64::from(c * c) * base.explained_variance).abs()
        / big.explained_variance;
    assert!(rel <= 1e-6);
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn projection_of_collinear_and_orthogonal_vectors() {
    let pair = DirectionPair {
        d_corr: unit(vec![1.0, 0.0]),
        d_halluc: unit(vec![0.0, 1.0]),
        explained_variance_corr: 1.0,
        explained_variance_halluc: 1.0,
    };
    let vectors = vec![
        TransitionVector {
            sample_id: "a".into(),
            kind: TransitionKind::Correct,
            v: vec![3.0, 0.0], // collinear with d_corr, norm 3
        },
        TransitionVector {
            sample_id: "a".into(),
            kind: TransitionKind::Hallucinated,
            v: vec![5.0, 0.0], // orthogonal to d_halluc
        },
    ];
    let records = project_samples(&vectors, &pair).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].p_c, 3.0);
    assert_eq!(records[0].p_h, 0.0);
}

#[test]
fn projection_requires_both_kinds() {
    let pair = DirectionPair {
        d_corr: unit(vec![1.0, 0.0]),
        d_halluc: unit(vec![0.0, 1.0]),
        explained_variance_corr: 1.0,
        explained_variance_halluc: 1.0,
    };
    let vectors = vec![TransitionVector {
        sample_id: "a".into(),
        kind: TransitionKind::Correct,
        v: vec![1.0, 0.0],
    }];
    match project_samples(&vectors, &pair) {
        Err(Error::MissingTransition { id, kind }) => {
            assert_eq!(id, "a");
            assert_eq!(kind, "hallucinated");
        }
        other => panic!("expected MissingTransition, got {other:?}"),
    }
}

#[test]
fn mean_projection_onto_own_direction_is_nonnegative() {
    // Forced by the sign convention, checked on random transition data.
    for seed in [5u64, 6, 7] {
        let raw = random_vectors(40, 16, seed);
        let vectors: Vec<TransitionVector> = raw
            .chunks(2)
            .enumerate()
            .map(|(i, pair)| {
                [
                    TransitionVector {
                        sample_id: format!("s{i}"),
                        kind: TransitionKind::Correct,
                        v: pair[0].clone(),
                    },
                    TransitionVector {
                        sample_id: format!("s{i}"),
                        kind: TransitionKind::Hallucinated,
                        v: pair[1].clone(),
                    },
                ]
            })
            .flatten()
            .collect();
        let pair = fit_directions(&vectors).unwrap();
        let records = project_samples(&vectors, &pair).unwrap();
        let mean_h: f64 = records.iter().map(|r| f64::from(r.p_h)).sum::<f64>() / records.len() as f64;
        let mean_c: f64 = records.iter().map(|r| f64::from(r.p_c)).sum::<f64>() / records.len() as f64;
        // The fit centers the data, so the mean projection equals the mean
        // vector's projection, which the sign rule makes non-negative.
        assert!(mean_h >= -1e-6, "seed {seed}: mean p_h = {mean_h}");
        assert!(mean_c >= -1e-6, "seed {seed}: mean p_c = {mean_c}");
    }
}

#[test]
fn vocab_projection_orthonormal_top1_and_rescale_invariance() {
    let model = synth::orthonormal_unembed_model(91);
    let tokenizer = ByteTokenizer;
    let h = model.config.hidden_size;
    let row: Vec<f64> = model
        .weights
        .unembed_row(9, h)
        .iter()
        .map(|&x| f64::from(x))
        .collect();

    let top = halo_core::directions::vocab_project(&row, &model, &tokenizer, 5).unwrap();
    assert_eq!(top.ranked[0].0, 9);
    assert!((top.ranked[0].2 - 1.0).abs() < 1e-5);

    // Positive rescaling must not change the ranking.
    let doubled: Vec<f64> = row.iter().map(|x| x * 2.0).collect();
    let top2 = halo_core::directions::vocab_project(&doubled, &model, &tokenizer, 5).unwrap();
    let ids: Vec<u32> = top.ranked.iter().map(|r| r.0).collect();
    let ids2: Vec<u32> = top2.ranked.iter().map(|r| r.0).collect();
    assert_eq!(ids, ids2);
}

#[test]
fn vocab_projection_full_ranking_is_a_permutation() {
    let model = synth::tiny_model(31);
    let tokenizer = ByteTokenizer;
    let h = model.config.hidden_size;
    let direction = unit(vec![1.0; h]);
    let v = model.config.vocab_size;
    let full = halo_core::directions::vocab_project(&direction, &model, &tokenizer, v).unwrap();
    assert_eq!(full.ranked.len(), v);
    let mut ids: Vec<u32> = full.ranked.iter().map(|r| r.0).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), v);
    // Scores are non-increasing.
    for pair in full.ranked.windows(2) {
        assert!(pair[0].2 >= pair[1].2);
    }
    // k > vocab_size is rejected.
    assert!(matches!(
        halo_core::directions::vocab_project(&direction, &model, &tokenizer, v + 1),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn vocab_projection_breaks_ties_by_lowest_id() {
    let model = synth::orthonormal_unembed_model(91);
    let tokenizer = ByteTokenizer;
    let h = model.config.hidden_size;
    // The zero direction scores every token exactly 0.0.
    let zeros = vec![0.0f64; h];
    let ranked = halo_core::directions::vocab_project(&zeros, &model, &tokenizer, 4).unwrap();
    let ids: Vec<u32> = ranked.ranked.iter().map(|r| r.0).collect();
    assert_eq!(ids, vec![0, 1, 2, 3]);
}

#[test]
fn direction_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_path = dir.path().join("directions.bin");
    let sidecar_path = dir.path().join("directions.json");
    let pair = DirectionPair {
        d_corr: unit((0..16).map(|i| (i as f64) - 7.5).collect()),
        d_halluc: unit((0..16).map(|i| ((i * i) as f64) - 60.0).collect()),
        explained_variance_corr: 2.5,
        explained_variance_halluc: 1.25,
    };
    save_directions(&bundle_path, &sidecar_path, &pair, 42).unwrap();

    let (d_corr, d_halluc) = load_directions(&bundle_path).unwrap();
    for (a, b) in d_corr.iter().zip(&pair.d_corr) {
        assert_eq!(*a, *b as f32);
    }
    for (a, b) in d_halluc.iter().zip(&pair.d_halluc) {
        assert_eq!(*a, *b as f32);
    }

    let sidecar: halo_core::directions::DirectionSidecar =
        serde_json::from_str(&std::fs::read_to_string(&sidecar_path).unwrap()).unwrap();
    assert_eq!(sidecar.n_samples, 42);
    assert_eq!(sidecar.sign_convention, "mean_projection_nonneg");
    assert_eq!(sidecar.explained_variance_corr, 2.5);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

    #[test]
    fn pca_handles_arbitrary_small_populations(
        seed in 0u64..1000,
        n in 3usize..24,
        h in 2usize..12,
    ) {
        let vectors = random_vectors(n, h, seed);
        let pca = pca_first_component(&vectors).unwrap();
        let (oracle_dir, oracle_val) = dense_top_eigen(&vectors);
        proptest::prop_assert!(abs_cosine(&pca.direction, &oracle_dir) >= 1.0 - 1e-6);
        let rel = (pca.explained_variance - oracle_val).abs() / oracle_val;
        proptest::prop_assert!(rel <= 1e-6);
    }
}
