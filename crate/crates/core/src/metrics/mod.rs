//! The five hint-quality metrics and the orchestrator that runs a
//! configured suite of methods over a dataset.
//!
//! Every scorer here is a plain function of its inputs and backends;
//! [`evaluate_dataset`] decides what to score and attaches the results.

mod config;
mod convergence;
mod evaluate;
mod familiarity;
mod leakage;
mod readability;
mod relevance;

use serde_json::Value;
use thiserror::Error;

use crate::client::ClientError;
use crate::enrich::EntityError;

pub use config::{MethodSpec, MetricConfig, Target};
pub use convergence::{
    convergence_llm, convergence_scored, parse_judgement, Candidate, ConvergenceReport,
    HintConvergence,
};
pub use evaluate::{
    build_evaluators, evaluate_dataset, evaluate_with, Backends, EvaluationSummary, Evaluator,
    FnProgress, MethodEvaluator, MethodStats, ProgressSink, Unit,
};
pub use familiarity::{
    entity_familiarity, familiarity_wikipedia, familiarity_wordfreq, load_frequency_table,
    read_frequency_table, FrequencyTable,
};
pub use leakage::{answerleakage_contextual, answerleakage_lexical};
pub use readability::{
    feature_value, parse_level, readability_linear, readability_llm, readability_traditional,
    Banding, Formula, FormulaScore, LinearScorer, FEATURES,
};
pub use relevance::{
    relevance_contextual, relevance_llm, relevance_rouge, relevance_static_embedding, rouge_tokens,
    RougeVariant,
};

/// A score plus optional machine-readable detail (flags, raw values).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricOutput {
    pub value: f64,
    pub detail: Option<Value>,
}

impl MetricOutput {
    pub fn new(value: f64) -> Self {
        MetricOutput {
            value,
            detail: None,
        }
    }

    pub fn flagged(value: f64, detail: Value) -> Self {
        MetricOutput {
            value,
            detail: Some(detail),
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("could not parse model output: {0:?}")]
    UnparseableCompletion(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("text has no words")]
    EmptyText,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("backend unavailable for `{0}`")]
    BackendUnavailable(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{0}` configured more than once")]
    DuplicateMethod(String),
    #[error("{0}")]
    Table(String),
    #[error(transparent)]
    Entity(#[from] EntityError),
}

/// Clamps a similarity to `[0, 1]`; NaN maps to 0.
pub fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}
