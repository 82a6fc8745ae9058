//! Paired-input construction, critical-state extraction, and awareness
//! scoring.
//!
//! Each QA sample yields two inputs over the same question: one ending in
//! the correct answer, one in the hallucinated answer. Three last-layer
//! hidden states are read out: the question-segment anchor state (s1), the
//! final state of the hallucinated input (s2), and the final state of the
//! correct input (s3). The awareness score is cos(s1, s2) - cos(s1, s3).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CaptureSpec, Engine, HiddenState, TokenSequence};
use crate::tokenizer::Tokenizer;

/// One question with its paired answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QASample {
    pub id: String,
    pub question: String,
    pub correct_answer: String,
    pub hallucinated_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial: Option<bool>,
}

impl QASample {
    /// Non-empty question and answers.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.question.is_empty() {
            return Err("empty question".into());
        }
        if self.correct_answer.is_empty() {
            return Err("empty correct_answer".into());
        }
        if self.hallucinated_answer.is_empty() {
            return Err("empty hallucinated_answer".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    None,
    Pro,
    Anti,
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StrategyKind::None => "none",
            StrategyKind::Pro => "pro",
            StrategyKind::Anti => "anti",
        };
        f.write_str(s)
    }
}

/// Prompting strategy: which confidence-shaping text, if any, precedes the
/// question of each branch.
///
/// Pro-prompting puts the encouraging text on the correct branch and the
/// discouraging text on the hallucinated branch; anti-prompting swaps them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStrategy {
    pub kind: StrategyKind,
    pub encouraging_text: String,
    pub discouraging_text: String,
}

pub const DEFAULT_ENCOURAGING: &str =
    "You excel in answering the following question with expertise";
pub const DEFAULT_DISCOURAGING: &str =
    "You have limited expertise in answering the following question";

impl PromptStrategy {
    pub fn with_kind(kind: StrategyKind) -> Self {
        Self {
            kind,
            encouraging_text: DEFAULT_ENCOURAGING.to_string(),
            discouraging_text: DEFAULT_DISCOURAGING.to_string(),
        }
    }

    pub fn none() -> Self {
        Self::with_kind(StrategyKind::None)
    }

    /// The prompt text for one branch, if the strategy uses one.
    fn branch_text(&self, branch: Branch) -> Option<&str> {
        match (self.kind, branch) {
            (StrategyKind::None, _) => None,
            (StrategyKind::Pro, Branch::Correct) => Some(&self.encouraging_text),
            (StrategyKind::Pro, Branch::Hallucinated) => Some(&self.discouraging_text),
            (StrategyKind::Anti, Branch::Correct) => Some(&self.discouraging_text),
            (StrategyKind::Anti, Branch::Hallucinated) => Some(&self.encouraging_text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Hallucinated,
    Correct,
}

/// Where the question-segment anchor (s1) sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S1Anchor {
    /// Last token of the answer cue ("Answer:"). The cue elicits the
    /// model's own answer prediction. Default.
    AnswerCue,
    /// Last token of the question text itself.
    QuestionEnd,
}

/// Everything build_inputs needs besides the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub strategy: PromptStrategy,
    pub include_knowledge: bool,
    pub anchor: S1Anchor,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            strategy: PromptStrategy::none(),
            include_knowledge: false,
            anchor: S1Anchor::AnswerCue,
        }
    }
}

/// Token ranges of one branch: where the question segment starts (first
/// token after any knowledge/prompt text) and where the anchor sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchSpan {
    pub question_start: usize,
    pub question_end: usize,
}

/// The paired tokenized inputs for one sample.
///
/// With strategy `none` the two branches are bitwise identical up to and
/// including `question_end`; under pro/anti prompting each branch carries
/// its own prompt text, so the spans are tracked per branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeInputs {
    pub sample_id: String,
    pub hallucinated_tokens: TokenSequence,
    pub correct_tokens: TokenSequence,
    pub hallucinated_span: BranchSpan,
    pub correct_span: BranchSpan,
}

impl ProbeInputs {
    pub fn max_len(&self) -> usize {
        self.hallucinated_tokens.len().max(self.correct_tokens.len())
    }
}

/// Text of one branch: `[{knowledge}\n][{prompt}\n]Question: {q}\nAnswer: {a}`.
fn branch_texts(
    sample: &QASample,
    opts: &ProbeOptions,
    branch: Branch,
) -> Result<(String, String, String)> {
    let mut pre = String::new();
    if opts.include_knowledge {
        let knowledge = sample
            .knowledge
            .as_deref()
            .ok_or_else(|| Error::MissingKnowledge(sample.id.clone()))?;
        pre.push_str(knowledge);
        pre.push('\n');
    }
    if let Some(prompt) = opts.strategy.branch_text(branch) {
        pre.push_str(prompt);
        pre.push('\n');
    }

    let mut anchor = pre.clone();
    anchor.push_str("Question: ");
    anchor.push_str(&sample.question);
    if opts.anchor == S1Anchor::AnswerCue {
        anchor.push_str("\nAnswer:");
    }

    let answer = match branch {
        Branch::Hallucinated => &sample.hallucinated_answer,
        Branch::Correct => &sample.correct_answer,
    };
    let mut full = pre.clone();
    full.push_str("Question: ");
    full.push_str(&sample.question);
    full.push_str("\nAnswer: ");
    full.push_str(answer);

    Ok((pre, anchor, full))
}

fn is_token_prefix(prefix: &[u32], full: &[u32]) -> bool {
    prefix.len() <= full.len() && full[..prefix.len()] == *prefix
}

fn tokenize_branch(
    sample: &QASample,
    opts: &ProbeOptions,
    branch: Branch,
    tokenizer: &dyn Tokenizer,
) -> Result<(TokenSequence, BranchSpan)> {
    let (pre, anchor, full) = branch_texts(sample, opts, branch)?;
    let pre_tokens = tokenizer.encode(&pre)?;
    let anchor_tokens = tokenizer.encode(&anchor)?;
    let full_tokens = tokenizer.encode(&full)?;
    // The anchor text must tokenize as a prefix of the full input, and
    // likewise for the pre-question text; a greedy tokenizer can merge
    // across the boundary, which would corrupt the spans.
    if !is_token_prefix(&anchor_tokens, &full_tokens)
        || !is_token_prefix(&pre_tokens, &anchor_tokens)
        || anchor_tokens.is_empty()
        || full_tokens.len() <= anchor_tokens.len()
    {
        return Err(Error::PrefixMismatch(sample.id.clone()));
    }
    let span = BranchSpan {
        question_start: pre_tokens.len(),
        question_end: anchor_tokens.len() - 1,
    };
    Ok((TokenSequence::new(full_tokens), span))
}

/// Prompt text for generation over a sample: the question (optionally
/// preceded by its knowledge text) up to and including the answer cue.
pub fn steering_prompt(sample: &QASample, include_knowledge: bool) -> Result<String> {
    let mut text = String::new();
    if include_knowledge {
        let knowledge = sample
            .knowledge
            .as_deref()
            .ok_or_else(|| Error::MissingKnowledge(sample.id.clone()))?;
        text.push_str(knowledge);
        text.push('\n');
    }
    text.push_str("Question: ");
    text.push_str(&sample.question);
    text.push_str("\nAnswer:");
    Ok(text)
}

/// Build the paired inputs for one sample.
pub fn build_inputs(
    sample: &QASample,
    opts: &ProbeOptions,
    tokenizer: &dyn Tokenizer,
) -> Result<ProbeInputs> {
    let (hallucinated_tokens, hallucinated_span) =
        tokenize_branch(sample, opts, Branch::Hallucinated, tokenizer)?;
    let (correct_tokens, correct_span) =
        tokenize_branch(sample, opts, Branch::Correct, tokenizer)?;

    if opts.strategy.kind == StrategyKind::None {
        // Shared-prefix invariant: without per-branch prompts the branches
        // must agree through the anchor token.
        let end = hallucinated_span.question_end;
        if correct_span.question_end != end
            || hallucinated_tokens.ids[..=end] != correct_tokens.ids[..=end]
        {
            return Err(Error::PrefixMismatch(sample.id.clone()));
        }
    }

    Ok(ProbeInputs {
        sample_id: sample.id.clone(),
        hallucinated_tokens,
        correct_tokens,
        hallucinated_span,
        correct_span,
    })
}

/// The three critical hidden states of one sample, all from the last layer.
///
/// `s1` is the anchor state of the hallucinated branch and `s1_corr` the
/// anchor state of the correct branch; they are bitwise identical whenever
/// the branches share their prefix (strategy `none`).
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTriple {
    pub sample_id: String,
    pub s1: HiddenState,
    pub s1_corr: HiddenState,
    pub s2: HiddenState,
    pub s3: HiddenState,
}

/// Run both branches and pull out the critical states.
pub fn extract_triple(engine: &Engine, inputs: &ProbeInputs) -> Result<HiddenTriple> {
    let last_layer = engine.last_layer();

    let halluc_out = engine.model.forward(
        &inputs.hallucinated_tokens,
        &CaptureSpec::hidden_at([
            (last_layer, inputs.hallucinated_span.question_end),
            (last_layer, inputs.hallucinated_tokens.last_position()),
        ]),
        None,
    )?;
    let corr_out = engine.model.forward(
        &inputs.correct_tokens,
        &CaptureSpec::hidden_at([
            (last_layer, inputs.correct_span.question_end),
            (last_layer, inputs.correct_tokens.last_position()),
        ]),
        None,
    )?;

    Ok(HiddenTriple {
        sample_id: inputs.sample_id.clone(),
        s1: halluc_out
            .trace
            .expect(last_layer, inputs.hallucinated_span.question_end)
            .clone(),
        s1_corr: corr_out
            .trace
            .expect(last_layer, inputs.correct_span.question_end)
            .clone(),
        s2: halluc_out
            .trace
            .expect(last_layer, inputs.hallucinated_tokens.last_position())
            .clone(),
        s3: corr_out
            .trace
            .expect(last_layer, inputs.correct_tokens.last_position())
            .clone(),
    })
}

/// Cosine and awareness scores for one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AwarenessRecord {
    pub sample_id: String,
    pub cos_halluc: f64,
    pub cos_corr: f64,
    pub awareness: f64,
}

/// Cosine similarity in f64, accumulated left to right. Zero-norm inputs
/// are an error: they indicate a broken model, not a measurement.
pub fn cosine(a: &HiddenState, b: &HiddenState) -> Result<f64> {
    debug_assert_eq!(a.values.len(), b.values.len());
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 {
        return Err(Error::DegenerateHiddenState {
            layer: a.layer,
            position: a.position,
        });
    }
    if norm_b == 0.0 {
        return Err(Error::DegenerateHiddenState {
            layer: b.layer,
            position: b.position,
        });
    }
    Ok(dot / (norm_a.sqrt() * norm_b.sqrt()))
}

/// Score one triple: cos_halluc = cos(s1, s2), cos_corr = cos(s1, s3),
/// awareness = cos_halluc - cos_corr.
pub fn awareness(triple: &HiddenTriple) -> Result<AwarenessRecord> {
    let cos_halluc = cosine(&triple.s1, &triple.s2)?;
    let cos_corr = cosine(&triple.s1_corr, &triple.s3)?;
    Ok(AwarenessRecord {
        sample_id: triple.sample_id.clone(),
        cos_halluc,
        cos_corr,
        awareness: cos_halluc - cos_corr,
    })
}

/// Why a sample produced no record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipReport {
    pub sample_id: String,
    pub reason: String,
}

/// Records plus skip reports, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRun {
    pub records: Vec<AwarenessRecord>,
    pub skipped: Vec<SkipReport>,
}

enum SampleOutcome {
    Record(Box<HiddenTriple>),
    Skip(SkipReport),
}

/// Extract triples for a sample list, skipping (and reporting) samples
/// whose inputs exceed the context window. Evaluation runs in parallel;
/// output order matches input order.
pub fn run_triples(
    engine: &Engine,
    samples: &[QASample],
    opts: &ProbeOptions,
) -> Result<(Vec<HiddenTriple>, Vec<SkipReport>)> {
    let outcomes: Vec<Result<SampleOutcome>> = samples
        .par_iter()
        .map(|sample| {
            let inputs = build_inputs(sample, opts, engine.tokenizer.as_ref())?;
            let max_len = engine.model.config.max_seq_len;
            if inputs.max_len() > max_len {
                return Ok(SampleOutcome::Skip(SkipReport {
                    sample_id: sample.id.clone(),
                    reason: format!(
                        "input of {} tokens exceeds max_seq_len {max_len}",
                        inputs.max_len()
                    ),
                }));
            }
            Ok(SampleOutcome::Record(Box::new(extract_triple(engine, &inputs)?)))
        })
        .collect();

    let mut triples = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            SampleOutcome::Record(triple) => triples.push(*triple),
            SampleOutcome::Skip(report) => skipped.push(report),
        }
    }
    if triples.is_empty() {
        return Err(Error::EmptyResult(samples.len()));
    }
    Ok((triples, skipped))
}

/// One awareness record per sample, in input order, plus skip reports.
pub fn run_probe(engine: &Engine, samples: &[QASample], opts: &ProbeOptions) -> Result<ProbeRun> {
    let (triples, skipped) = run_triples(engine, samples, opts)?;
    let records = triples
        .iter()
        .map(awareness)
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeRun { records, skipped })
}
