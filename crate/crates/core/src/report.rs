//! Machine-readable output formats: CSV tables and the JSON report
//! structs. Numbers print with 9 significant digits and a '.' decimal
//! separator; all writers are deterministic.

use serde::Serialize;

use crate::directions::{ProjectionRecord, VocabProjection};
use crate::intervention::SweepEntry;
use crate::probe::AwarenessRecord;
use crate::stats::{stars, RegressionResult, TTestResult};

/// 9 significant digits, scientific notation.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn csv_into_string(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("in-memory csv writer"))
        .expect("csv output is utf-8")
}

/// `sample_id,cos_halluc,cos_corr,awareness,strategy,knowledge_included`
pub fn awareness_csv(
    records: &[AwarenessRecord],
    strategy: &str,
    knowledge_included: bool,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sample_id",
        "cos_halluc",
        "cos_corr",
        "awareness",
        "strategy",
        "knowledge_included",
    ])
    .expect("csv header");
    for r in records {
        w.write_record([
            r.sample_id.as_str(),
            &fmt_sig9(r.cos_halluc),
            &fmt_sig9(r.cos_corr),
            &fmt_sig9(r.awareness),
            strategy,
            if knowledge_included { "true" } else { "false" },
        ])
        .expect("csv row");
    }
    csv_into_string(w)
}

/// `sample_id,p_h,p_c,awareness` — projections joined with their awareness
/// scores by position (both lists are in sample order).
pub fn projection_csv(projections: &[ProjectionRecord], awareness: &[AwarenessRecord]) -> String {
    debug_assert_eq!(projections.len(), awareness.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "p_h", "p_c", "awareness"])
        .expect("csv header");
    for (p, a) in projections.iter().zip(awareness) {
        debug_assert_eq!(p.sample_id, a.sample_id);
        w.write_record([
            p.sample_id.as_str(),
            &fmt_sig9(f64::from(p.p_h)),
            &fmt_sig9(f64::from(p.p_c)),
            &fmt_sig9(a.awareness),
        ])
        .expect("csv row");
    }
    csv_into_string(w)
}

/// `layer_threshold,mean_diff,ci_halfwidth,n`
pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer_threshold", "mean_diff", "ci_halfwidth", "n"])
        .expect("csv header");
    for e in entries {
        w.write_record([
            e.layer_threshold.to_string().as_str(),
            &fmt_sig9(e.mean_diff),
            &fmt_sig9(e.ci_halfwidth),
            &e.n.to_string(),
        ])
        .expect("csv row");
    }
    csv_into_string(w)
}

/// `direction,rank,token_id,token,score` for both direction rankings.
pub fn top_tokens_csv(correct: &VocabProjection, hallucinated: &VocabProjection) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["direction", "rank", "token_id", "token", "score"])
        .expect("csv header");
    for (name, projection) in [("correct", correct), ("hallucinated", hallucinated)] {
        for (rank, (id, token, score)) in projection.ranked.iter().enumerate() {
            w.write_record([
                name,
                &(rank + 1).to_string(),
                &id.to_string(),
                token,
                &fmt_sig9(*score),
            ])
            .expect("csv row");
        }
    }
    csv_into_string(w)
}

/// One t-test in the shape of the significance tables:
/// `{statistic, value, t, p, df, stars}`.
#[derive(Debug, Clone, Serialize)]
pub struct TTestReport {
    pub statistic: String,
    pub value: f64,
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub stars: String,
}

impl TTestReport {
    pub fn new(statistic: impl Into<String>, result: &TTestResult) -> Self {
        Self {
            statistic: statistic.into(),
            value: result.mean,
            t: result.t_statistic,
            p: result.p_value,
            df: result.df,
            stars: stars(result.p_value).to_string(),
        }
    }
}

/// One regression in the shape of the regression tables.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionReport {
    pub dependent_variable: String,
    pub regressor: String,
    pub slope: f64,
    pub slope_se: f64,
    pub slope_stars: String,
    pub intercept: f64,
    pub intercept_se: f64,
    pub intercept_stars: String,
    pub observations: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub residual_std_error: f64,
    pub f_statistic: f64,
}

impl RegressionReport {
    pub fn new(
        dependent: impl Into<String>,
        regressor: impl Into<String>,
        result: &RegressionResult,
    ) -> Self {
        Self {
            dependent_variable: dependent.into(),
            regressor: regressor.into(),
            slope: result.slope,
            slope_se: result.slope_se,
            slope_stars: stars(result.slope_p).to_string(),
            intercept: result.intercept,
            intercept_se: result.intercept_se,
            intercept_stars: stars(result.intercept_p).to_string(),
            observations: result.n,
            r_squared: result.r_squared,
            adj_r_squared: result.adj_r_squared,
            residual_std_error: result.residual_se,
            f_statistic: result.f_statistic,
        }
    }
}
