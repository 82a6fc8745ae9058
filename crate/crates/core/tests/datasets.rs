//! Dataset ingestion: format mappings, filtering, and the seeded
//! subsample.

use std::fmt::Write as _;
use std::path::PathBuf;

use halo_core::datasets::{load, CategoryFilter, DatasetFormat, DatasetSpec};
use halo_core::rng::Xoshiro256StarStar;
use halo_core::Error;

fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn spec(path: PathBuf, format: DatasetFormat) -> DatasetSpec {
    DatasetSpec {
        path,
        format,
        category_filter: None,
        sample_n: None,
        seed: 0,
        hallucinated_column: None,
    }
}

/// A TruthfulQA-shaped CSV with the real column layout: 437 adversarial
/// rows followed by 380 non-adversarial ones.
fn truthfulqa_csv() -> String {
    let mut text = String::from(
        "Type,Category,Question,Best Answer,Correct Answers,Incorrect Answers,Source\n",
    );
    for i in 0..817 {
        let kind = if i < 437 { "Adversarial" } else { "Non-Adversarial" };
        writeln!(
            text,
            "{kind},Misc,\"Question number {i}?\",right answer {i},\"right answer {i}; also fine\",\"wrong one {i}; wrong two {i}\",source"
        )
        .unwrap();
    }
    text
}

#[test]
fn truthfulqa_mapping_and_adversarial_filter() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "tqa.csv", &truthfulqa_csv());

    let all = load(&spec(path.clone(), DatasetFormat::TruthfulqaCsv)).unwrap();
    assert_eq!(all.samples.len(), 817);
    assert!(all.rejected.is_empty());
    let first = &all.samples[0];
    assert_eq!(first.id, "row0");
    assert_eq!(first.question, "Question number 0?");
    assert_eq!(first.correct_answer, "right answer 0");
    // First ";"-separated incorrect answer.
    assert_eq!(first.hallucinated_answer, "wrong one 0");
    assert_eq!(first.adversarial, Some(true));
    assert!(first.knowledge.is_none());

    let mut adversarial_spec = spec(path.clone(), DatasetFormat::TruthfulqaCsv);
    adversarial_spec.category_filter = Some(CategoryFilter::Adversarial);
    let adversarial = load(&adversarial_spec).unwrap();
    assert_eq!(adversarial.samples.len(), 437);

    let mut non_spec = spec(path, DatasetFormat::TruthfulqaCsv);
    non_spec.category_filter = Some(CategoryFilter::NonAdversarial);
    let non_adversarial = load(&non_spec).unwrap();
    assert_eq!(non_adversarial.samples.len(), 380);
    assert_eq!(non_adversarial.samples[0].adversarial, Some(false));
}

#[test]
fn truthfulqa_hallucinated_column_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(&dir, "tqa.csv", &truthfulqa_csv());
    let mut s = spec(path, DatasetFormat::TruthfulqaCsv);
    s.hallucinated_column = Some("Correct Answers".to_string());
    let out = load(&s).unwrap();
    // With the override, the "hallucinated" answer comes from the other
    // column's first entry.
    assert_eq!(out.samples[0].hallucinated_answer, "right answer 0");
}

#[test]
fn halueval_rows_carry_knowledge() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(
        &dir,
        "halueval.jsonl",
        concat!(
            "{\"knowledge\": \"K0.\", \"question\": \"Q0?\", \"right_answer\": \"R0\", \"hallucinated_answer\": \"H0\"}\n",
            "{\"knowledge\": \"K1.\", \"question\": \"Q1?\", \"right_answer\": \"R1\", \"hallucinated_answer\": \"H1\"}\n",
        ),
    );
    let out = load(&spec(path, DatasetFormat::HaluevalJsonl)).unwrap();
    assert_eq!(out.samples.len(), 2);
    assert_eq!(out.samples[0].id, "row0");
    assert_eq!(out.samples[0].knowledge.as_deref(), Some("K0."));
    assert_eq!(out.samples[0].correct_answer, "R0");
    assert_eq!(out.samples[1].hallucinated_answer, "H1");
    assert_eq!(out.samples[0].adversarial, None);
}

#[test]
fn generic_jsonl_round_trips_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(
        &dir,
        "generic.jsonl",
        concat!(
            "{\"id\": \"a\", \"question\": \"Q?\", \"correct_answer\": \"C\", \"hallucinated_answer\": \"H\"}\n",
            "\n",
            "{\"id\": \"b\", \"question\": \"Q2?\", \"correct_answer\": \"C2\", \"hallucinated_answer\": \"H2\", \"knowledge\": \"K\", \"adversarial\": true}\n",
        ),
    );
    let out = load(&spec(path, DatasetFormat::GenericJsonl)).unwrap();
    assert_eq!(out.samples.len(), 2);
    assert_eq!(out.samples[0].id, "a");
    assert!(out.samples[0].knowledge.is_none());
    assert_eq!(out.samples[1].knowledge.as_deref(), Some("K"));
    assert_eq!(out.samples[1].adversarial, Some(true));
}

#[test]
fn invalid_rows_are_rejected_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(
        &dir,
        "generic.jsonl",
        concat!(
            "{\"id\": \"a\", \"question\": \"Q?\", \"correct_answer\": \"C\", \"hallucinated_answer\": \"H\"}\n",
            "{\"id\": \"bad\", \"question\": \"\", \"correct_answer\": \"C\", \"hallucinated_answer\": \"H\"}\n",
            "{\"id\": \"c\", \"question\": \"Q?\", \"correct_answer\": \"C\", \"hallucinated_answer\": \"H\"}\n",
        ),
    );
    let out = load(&spec(path, DatasetFormat::GenericJsonl)).unwrap();
    assert_eq!(out.samples.len(), 2);
    assert_eq!(out.rejected.len(), 1);
    assert_eq!(out.rejected[0].line, 2);
    assert!(out.rejected[0].reason.contains("question"));
}

#[test]
fn parse_failure_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(
        &dir,
        "generic.jsonl",
        "{\"id\": \"a\", \"question\": \"Q?\", \"correct_answer\": \"C\", \"hallucinated_answer\": \"H\"}\nnot json\n",
    );
    match load(&spec(path, DatasetFormat::GenericJsonl)) {
        Err(Error::ParseFailure { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected ParseFailure, got {other:?}"),
    }
}

fn hundred_rows(dir: &tempfile::TempDir) -> PathBuf {
    let mut text = String::new();
    for i in 0..100 {
        writeln!(
            text,
            "{{\"id\": \"r{i}\", \"question\": \"Q{i}?\", \"correct_answer\": \"C{i}\", \"hallucinated_answer\": \"H{i}\"}}"
        )
        .unwrap();
    }
    write_file(dir, "hundred.jsonl", &text)
}

#[test]
fn full_size_subsample_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = hundred_rows(&dir);
    let mut s = spec(path, DatasetFormat::GenericJsonl);
    s.sample_n = Some(100);
    s.seed = 12345;
    let out = load(&s).unwrap();
    let ids: Vec<&str> = out.samples.iter().map(|q| q.id.as_str()).collect();
    let expected: Vec<String> = (0..100).map(|i| format!("r{i}")).collect();
    assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
}

#[test]
fn subsample_is_seed_stable_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let path = hundred_rows(&dir);

    let run = |seed: u64| {
        let mut s = spec(path.clone(), DatasetFormat::GenericJsonl);
        s.sample_n = Some(20);
        s.seed = seed;
        load(&s)
            .unwrap()
            .samples
            .iter()
            .map(|q| q.id.clone())
            .collect::<Vec<_>>()
    };

    let a = run(7);
    let b = run(7);
    let c = run(8);
    assert_eq!(a, b, "same seed must reproduce the selection");
    assert_ne!(a, c, "different seeds must differ on 100 rows");

    // Brute-force replay of the partial Fisher-Yates shuffle.
    let mut indices: Vec<usize> = (0..100).collect();
    let mut rng = Xoshiro256StarStar::new(7);
    for i in 0..20 {
        let j = i + rng.below((100 - i) as u64) as usize;
        indices.swap(i, j);
    }
    let replayed: Vec<String> = indices[..20].iter().map(|&i| format!("r{i}")).collect();
    assert_eq!(a, replayed);
}

#[test]
fn oversized_subsample_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = hundred_rows(&dir);
    let mut s = spec(path, DatasetFormat::GenericJsonl);
    s.sample_n = Some(101);
    match load(&s) {
        Err(Error::SampleTooLarge {
            requested,
            available,
        }) => {
            assert_eq!(requested, 101);
            assert_eq!(available, 100);
        }
        other => panic!("expected SampleTooLarge, got {other:?}"),
    }
}

#[test]
fn filter_applies_before_subsampling() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for i in 0..50 {
        writeln!(
            text,
            "{{\"id\": \"r{i}\", \"question\": \"Q?\", \"correct_answer\": \"C\", \"hallucinated_answer\": \"H\", \"adversarial\": {}}}",
            i % 2 == 0
        )
        .unwrap();
    }
    let path = write_file(&dir, "mixed.jsonl", &text);
    let mut s = spec(path, DatasetFormat::GenericJsonl);
    s.category_filter = Some(CategoryFilter::Adversarial);
    s.sample_n = Some(10);
    s.seed = 3;
    let out = load(&s).unwrap();
    assert_eq!(out.samples.len(), 10);
    assert!(out.samples.iter().all(|q| q.adversarial == Some(true)));
}

#[test]
fn loading_is_a_pure_function_of_bytes_and_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = hundred_rows(&dir);
    let mut s = spec(path, DatasetFormat::GenericJsonl);
    s.sample_n = Some(33);
    s.seed = 99;
    let a = load(&s).unwrap();
    let b = load(&s).unwrap();
    assert_eq!(a, b);
}
