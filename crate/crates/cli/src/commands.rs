//! The five commands: probe, directions, sweep, steer, selfcheck.

use serde::Serialize;

use halo_core::datasets::{self, RejectedRow};
use halo_core::directions::{
    fit_directions, load_directions, project_samples, save_directions, transition_vectors,
    vocab_project,
};
use halo_core::intervention::{layer_sweep, steer_generate, SteerRecord};
use halo_core::probe::{self, steering_prompt, SkipReport};
use halo_core::report::{
    awareness_csv, projection_csv, sweep_csv, top_tokens_csv, RegressionReport, TTestReport,
};
use halo_core::stats::{ols_simple, one_tailed_ttest_greater};
use halo_core::{Engine, Error, QASample};

use crate::config::ExperimentConfig;
use crate::output::OutputDir;
use crate::CliError;

fn load_engine(config: &ExperimentConfig) -> Result<Engine, CliError> {
    let (model_config, weights) = config.model_paths()?;
    Engine::load(model_config, weights, config.tokenizer.as_deref()).map_err(CliError::from)
}

fn load_samples(config: &ExperimentConfig) -> Result<(Vec<QASample>, Vec<RejectedRow>), CliError> {
    let spec = config.dataset_spec()?;
    let outcome = datasets::load(&spec)?;
    Ok((outcome.samples, outcome.rejected))
}

/// Sidecar run report shared by the dataset commands.
#[derive(Serialize)]
struct RunReport<'a> {
    samples_loaded: usize,
    records_produced: usize,
    rejected_rows: &'a [RejectedRow],
    skipped_samples: &'a [SkipReport],
}

pub fn cmd_probe(config: &ExperimentConfig) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let (samples, rejected) = load_samples(config)?;
    let opts = config.probe_options();
    let run = probe::run_probe(&engine, &samples, &opts)?;

    let awareness_values: Vec<f64> = run.records.iter().map(|r| r.awareness).collect();
    let ttest = one_tailed_ttest_greater(&awareness_values, 0.0)?;
    let report = TTestReport::new("awareness_mean", &ttest);

    let out = OutputDir::new(&config.out)?;
    out.write(
        "awareness.csv",
        awareness_csv(
            &run.records,
            &config.strategy.to_string(),
            config.knowledge,
        )
        .as_bytes(),
    )?;
    out.write_json("ttest.json", &report)?;
    out.write_json(
        "probe_report.json",
        &RunReport {
            samples_loaded: samples.len(),
            records_produced: run.records.len(),
            rejected_rows: &rejected,
            skipped_samples: &run.skipped,
        },
    )?;
    Ok(())
}

pub fn cmd_directions(config: &ExperimentConfig) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let (samples, rejected) = load_samples(config)?;
    let opts = config.probe_options();

    let (triples, skipped) = probe::run_triples(&engine, &samples, &opts)?;
    let records = triples
        .iter()
        .map(probe::awareness)
        .collect::<Result<Vec<_>, Error>>()?;
    let vectors = transition_vectors(&triples);
    let pair = fit_directions(&vectors)?;
    let projections = project_samples(&vectors, &pair)?;

    let top_corr = vocab_project(&pair.d_corr, &engine.model, engine.tokenizer.as_ref(), config.top_k)?;
    let top_halluc = vocab_project(
        &pair.d_halluc,
        &engine.model,
        engine.tokenizer.as_ref(),
        config.top_k,
    )?;

    let awareness_values: Vec<f64> = records.iter().map(|r| r.awareness).collect();
    let ph_values: Vec<f64> = projections.iter().map(|p| f64::from(p.p_h)).collect();
    let pc_values: Vec<f64> = projections.iter().map(|p| f64::from(p.p_c)).collect();
    let regressions = vec![
        RegressionReport::new("p_h", "awareness", &ols_simple(&awareness_values, &ph_values)?),
        RegressionReport::new("p_c", "awareness", &ols_simple(&awareness_values, &pc_values)?),
    ];

    let out = OutputDir::new(&config.out)?;
    save_directions(
        &out.path("directions.bin"),
        &out.path("directions.json"),
        &pair,
        triples.len(),
    )?;
    out.write("top_tokens.csv", top_tokens_csv(&top_corr, &top_halluc).as_bytes())?;
    out.write(
        "projections.csv",
        projection_csv(&projections, &records).as_bytes(),
    )?;
    out.write_json("regression.json", &regressions)?;
    out.write_json(
        "directions_report.json",
        &RunReport {
            samples_loaded: samples.len(),
            records_produced: records.len(),
            rejected_rows: &rejected,
            skipped_samples: &skipped,
        },
    )?;
    Ok(())
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let (samples, rejected) = load_samples(config)?;
    let opts = config.probe_options();
    let outcome = layer_sweep(&engine, &samples, &config.thresholds, &opts)?;

    let out = OutputDir::new(&config.out)?;
    out.write("sweep.csv", sweep_csv(&outcome.entries).as_bytes())?;
    out.write_json(
        "sweep_report.json",
        &RunReport {
            samples_loaded: samples.len(),
            records_produced: outcome.entries.first().map_or(0, |e| e.n),
            rejected_rows: &rejected,
            skipped_samples: &outcome.skipped,
        },
    )?;
    Ok(())
}

pub fn cmd_steer(config: &ExperimentConfig) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let directions_path = config
        .directions
        .as_ref()
        .ok_or_else(|| CliError::usage("no direction bundle given (--directions or config)"))?;
    let (d_corr, _d_halluc) = load_directions(directions_path)?;
    let alpha = config.alpha as f32;

    let mut lines = Vec::new();
    let mut skipped: Vec<SkipReport> = Vec::new();
    let mut rejected: Vec<RejectedRow> = Vec::new();
    let loaded;

    if let Some(prompt) = &config.prompt {
        let outcome = steer_generate(&engine, prompt, &d_corr, alpha, config.max_new_tokens)?;
        loaded = 1;
        lines.push(SteerRecord {
            id: "prompt".to_string(),
            question: prompt.clone(),
            original: outcome.original,
            adjusted: outcome.adjusted,
            true_answer: None,
        });
    } else {
        let (samples, rejected_rows) = load_samples(config)?;
        rejected = rejected_rows;
        loaded = samples.len();
        for sample in &samples {
            let prompt = steering_prompt(sample, config.knowledge)?;
            match steer_generate(&engine, &prompt, &d_corr, alpha, config.max_new_tokens) {
                Ok(outcome) => lines.push(SteerRecord {
                    id: sample.id.clone(),
                    question: sample.question.clone(),
                    original: outcome.original,
                    adjusted: outcome.adjusted,
                    true_answer: Some(sample.correct_answer.clone()),
                }),
                Err(Error::ContextOverflow { .. }) | Err(Error::SequenceTooLong { .. }) => {
                    skipped.push(SkipReport {
                        sample_id: sample.id.clone(),
                        reason: "prompt exceeds the context window".to_string(),
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        if lines.is_empty() {
            return Err(Error::EmptyResult(loaded).into());
        }
    }

    let mut jsonl = String::new();
    for line in &lines {
        jsonl.push_str(&serde_json::to_string(line).expect("steer record serialization"));
        jsonl.push('\n');
    }

    let out = OutputDir::new(&config.out)?;
    out.write("steer.jsonl", jsonl.as_bytes())?;
    out.write_json(
        "steer_report.json",
        &RunReport {
            samples_loaded: loaded,
            records_produced: lines.len(),
            rejected_rows: &rejected,
            skipped_samples: &skipped,
        },
    )?;
    Ok(())
}

pub fn cmd_selfcheck() -> Result<(), CliError> {
    let outcomes = halo_core::validate::run_selfcheck();
    let mut all_passed = true;
    for outcome in &outcomes {
        let status = if outcome.passed { "ok" } else { "FAIL" };
        println!("[{status}] {}: {}", outcome.name, outcome.detail);
        all_passed &= outcome.passed;
    }
    if all_passed {
        println!("selfcheck passed ({} checks)", outcomes.len());
        Ok(())
    } else {
        Err(CliError::model("selfcheck failed"))
    }
}
