//! Dataset ingestion: TruthfulQA-shaped CSV, HaluEval-shaped JSONL, and a
//! generic JSONL format, with category filtering and seeded subsampling.
//!
//! Loading is a pure function of the file bytes and the spec: row order is
//! file order, then the filter, then a seeded partial Fisher-Yates
//! subsample (identical across runs and platforms for a fixed seed).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::QASample;
use crate::rng::subsample_indices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    TruthfulqaCsv,
    HaluevalJsonl,
    GenericJsonl,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truthfulqa_csv" => Ok(Self::TruthfulqaCsv),
            "halueval_jsonl" => Ok(Self::HaluevalJsonl),
            "generic_jsonl" => Ok(Self::GenericJsonl),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl std::fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::TruthfulqaCsv => "truthfulqa_csv",
            Self::HaluevalJsonl => "halueval_jsonl",
            Self::GenericJsonl => "generic_jsonl",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryFilter {
    Adversarial,
    NonAdversarial,
}

impl FromStr for CategoryFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adversarial" => Ok(Self::Adversarial),
            "non_adversarial" => Ok(Self::NonAdversarial),
            other => Err(Error::UnknownFormat(format!("category filter {other}"))),
        }
    }
}

/// What to load and how to cut it down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_filter: Option<CategoryFilter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_n: Option<usize>,
    pub seed: u64,
    /// TruthfulQA only: column holding the hallucinated answers (first
    /// ";"-separated entry is taken). Defaults to "Incorrect Answers".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hallucinated_column: Option<String>,
}

/// A row that violated the sample invariants and was excluded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome {
    pub samples: Vec<QASample>,
    pub rejected: Vec<RejectedRow>,
}

pub fn load(spec: &DatasetSpec) -> Result<LoadOutcome> {
    let raw = std::fs::read_to_string(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
    let (mut rows, rejected) = match spec.format {
        DatasetFormat::TruthfulqaCsv => parse_truthfulqa(&spec.path, &raw, spec)?,
        DatasetFormat::HaluevalJsonl => parse_halueval(&spec.path, &raw)?,
        DatasetFormat::GenericJsonl => parse_generic(&spec.path, &raw)?,
    };

    if let Some(filter) = spec.category_filter {
        let want = matches!(filter, CategoryFilter::Adversarial);
        rows.retain(|s| s.adversarial == Some(want));
    }

    if let Some(n) = spec.sample_n {
        if n > rows.len() {
            return Err(Error::SampleTooLarge {
                requested: n,
                available: rows.len(),
            });
        }
        let picked = subsample_indices(rows.len(), n, spec.seed);
        let mut by_index: Vec<Option<QASample>> = rows.into_iter().map(Some).collect();
        rows = picked
            .into_iter()
            .map(|i| by_index[i].take().expect("indices are distinct"))
            .collect();
    }

    Ok(LoadOutcome {
        samples: rows,
        rejected,
    })
}

fn accept(
    sample: QASample,
    line: usize,
    rows: &mut Vec<QASample>,
    rejected: &mut Vec<RejectedRow>,
) {
    match sample.check() {
        Ok(()) => rows.push(sample),
        Err(reason) => rejected.push(RejectedRow { line, reason }),
    }
}

/// TruthfulQA CSV: `Type`, `Question`, `Best Answer`, `Incorrect Answers`
/// (";"-separated). Rows have no id column, so ids are synthesized as
/// `row{index}` over data rows.
fn parse_truthfulqa(
    path: &Path,
    raw: &str,
    spec: &DatasetSpec,
) -> Result<(Vec<QASample>, Vec<RejectedRow>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::ParseFailure {
            path: path.into(),
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::ParseFailure {
            path: path.into(),
            line: 1,
            reason: format!("missing column {name:?}"),
        })
    };
    let type_col = column("Type")?;
    let question_col = column("Question")?;
    let best_col = column("Best Answer")?;
    let incorrect_name = spec
        .hallucinated_column
        .as_deref()
        .unwrap_or("Incorrect Answers");
    let incorrect_col = column(incorrect_name)?;

    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header occupies line 1
        let record = record.map_err(|e| Error::ParseFailure {
            path: path.into(),
            line,
            reason: e.to_string(),
        })?;
        let field = |col: usize| record.get(col).unwrap_or("").trim().to_string();
        let first_incorrect = field(incorrect_col)
            .split(';')
            .next()
            .unwrap_or("")
            .trim()
            .to_string();
        let sample = QASample {
            id: format!("row{i}"),
            question: field(question_col),
            correct_answer: field(best_col),
            hallucinated_answer: first_incorrect,
            knowledge: None,
            adversarial: Some(field(type_col) == "Adversarial"),
        };
        accept(sample, line, &mut rows, &mut rejected);
    }
    Ok((rows, rejected))
}

#[derive(Deserialize)]
struct HaluevalRow {
    knowledge: Option<String>,
    question: String,
    right_answer: String,
    hallucinated_answer: String,
}

/// HaluEval QA JSONL: `knowledge`, `question`, `right_answer`,
/// `hallucinated_answer` per line.
fn parse_halueval(path: &Path, raw: &str) -> Result<(Vec<QASample>, Vec<RejectedRow>)> {
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    let mut index = 0;
    for (lineno, text) in raw.lines().enumerate() {
        let line = lineno + 1;
        if text.trim().is_empty() {
            continue;
        }
        let row: HaluevalRow = serde_json::from_str(text).map_err(|e| Error::ParseFailure {
            path: path.into(),
            line,
            reason: e.to_string(),
        })?;
        let sample = QASample {
            id: format!("row{index}"),
            question: row.question,
            correct_answer: row.right_answer,
            hallucinated_answer: row.hallucinated_answer,
            knowledge: row.knowledge,
            adversarial: None,
        };
        index += 1;
        accept(sample, line, &mut rows, &mut rejected);
    }
    Ok((rows, rejected))
}

/// Generic JSONL with QASample field names.
fn parse_generic(path: &Path, raw: &str) -> Result<(Vec<QASample>, Vec<RejectedRow>)> {
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for (lineno, text) in raw.lines().enumerate() {
        let line = lineno + 1;
        if text.trim().is_empty() {
            continue;
        }
        let sample: QASample = serde_json::from_str(text).map_err(|e| Error::ParseFailure {
            path: path.into(),
            line,
            reason: e.to_string(),
        })?;
        accept(sample, line, &mut rows, &mut rejected);
    }
    Ok((rows, rejected))
}
