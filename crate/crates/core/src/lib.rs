//! Instrumented decoder-only transformer engine plus an analysis toolkit
//! for probing how a model's final hidden state reacts to correct versus
//! hallucinated answers.
//!
//! The crate is organized around a deterministic f32 inference core
//! ([`model`]) and pure analysis passes built on top of it:
//!
//! - [`probe`] builds paired inputs, extracts the critical hidden states,
//!   and computes per-sample awareness scores.
//! - [`directions`] fits the correct/hallucinated transition directions by
//!   PCA and projects them into vocabulary space.
//! - [`intervention`] measures attention-blocking effect sizes and runs
//!   steered generation.
//! - [`stats`] provides the t-tests, normality screen, and simple
//!   regression used in the reports.
//! - [`datasets`] ingests QA datasets with seeded, portable subsampling.

pub mod bundle;
pub mod datasets;
pub mod directions;
pub mod error;
pub mod intervention;
pub mod model;
pub mod probe;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod tokenizer;
pub mod validate;

pub use error::{Error, ErrorKind, Result};
pub use model::{
    ActivationTrace, AttentionBlockSpec, AttentionMaps, CaptureSpec, Engine, ForwardOutput,
    HiddenState, Model, ModelConfig, SteeringSpec, TokenSequence, WeightStore,
};
pub use probe::{
    AwarenessRecord, HiddenTriple, ProbeInputs, ProbeOptions, PromptStrategy, QASample, S1Anchor,
    StrategyKind,
};
pub use tensor::Tensor;
pub use tokenizer::{ByteTokenizer, Tokenizer, VocabTokenizer};
