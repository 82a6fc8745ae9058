//! Experiment configuration: one JSON document, every field overridable by
//! a flag of the same name.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use halo_core::datasets::{CategoryFilter, DatasetFormat, DatasetSpec};
use halo_core::probe::{DEFAULT_DISCOURAGING, DEFAULT_ENCOURAGING};
use halo_core::{ProbeOptions, PromptStrategy, S1Anchor, StrategyKind};

use crate::CliError;

/// Everything a command needs. Unset paths stay `None` so each command can
/// demand exactly what it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Weight bundle path.
    pub model: Option<PathBuf>,
    /// Model config JSON path.
    pub model_config: Option<PathBuf>,
    /// Tokenizer JSON path; absent selects the byte-level tokenizer.
    pub tokenizer: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub category_filter: Option<CategoryFilter>,
    pub sample_n: Option<usize>,
    pub hallucinated_column: Option<String>,
    pub strategy: StrategyKind,
    pub encouraging_text: String,
    pub discouraging_text: String,
    pub knowledge: bool,
    pub anchor: S1Anchor,
    pub alpha: f64,
    pub thresholds: Vec<usize>,
    pub top_k: usize,
    pub max_new_tokens: usize,
    /// Direction bundle consumed by `steer`.
    pub directions: Option<PathBuf>,
    /// Ad-hoc prompt for `steer`; absent runs over the dataset.
    pub prompt: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            model_config: None,
            tokenizer: None,
            dataset: None,
            format: DatasetFormat::GenericJsonl,
            category_filter: None,
            sample_n: None,
            hallucinated_column: None,
            strategy: StrategyKind::None,
            encouraging_text: DEFAULT_ENCOURAGING.to_string(),
            discouraging_text: DEFAULT_DISCOURAGING.to_string(),
            knowledge: false,
            anchor: S1Anchor::AnswerCue,
            alpha: 100.0,
            thresholds: halo_core::intervention::DEFAULT_SWEEP_THRESHOLDS.to_vec(),
            top_k: 10,
            max_new_tokens: 16,
            directions: None,
            prompt: None,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::usage(format!("malformed config {}: {e}", path.display())))
    }

    pub fn probe_options(&self) -> ProbeOptions {
        ProbeOptions {
            strategy: PromptStrategy {
                kind: self.strategy,
                encouraging_text: self.encouraging_text.clone(),
                discouraging_text: self.discouraging_text.clone(),
            },
            include_knowledge: self.knowledge,
            anchor: self.anchor,
        }
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec, CliError> {
        let path = self
            .dataset
            .clone()
            .ok_or_else(|| CliError::usage("no dataset given (--dataset or config)"))?;
        Ok(DatasetSpec {
            path,
            format: self.format,
            category_filter: self.category_filter,
            sample_n: self.sample_n,
            seed: self.seed,
            hallucinated_column: self.hallucinated_column.clone(),
        })
    }

    pub fn model_paths(&self) -> Result<(&PathBuf, &PathBuf), CliError> {
        let weights = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::usage("no weight bundle given (--model or config)"))?;
        let config = self
            .model_config
            .as_ref()
            .ok_or_else(|| CliError::usage("no model config given (--model-config or config)"))?;
        Ok((config, weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_losslessly() {
        let mut config = ExperimentConfig::default();
        config.model = Some(PathBuf::from("m.bin"));
        config.sample_n = Some(40);
        config.strategy = StrategyKind::Pro;
        config.thresholds = vec![0, 2, 4];
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>("{\"bogus\": 1}");
        assert!(err.is_err());
    }
}
