//! Hint generation and evaluation for factoid questions.
//!
//! The crate is organized the way a hint-evaluation run flows:
//!
//! * [`model`] — datasets, subsets, instances and their text units.
//! * [`io`] — canonical JSON, compressed archives, validation and the
//!   dataset registry.
//! * [`enrich`] — tokenization and sentence statistics, question typing,
//!   entity extraction.
//! * [`client`] — chat, embedding, pageview and scoring backends.
//! * [`generation`] — answer-aware and answer-agnostic hint generation.
//! * [`metrics`] — relevance, readability, convergence, familiarity and
//!   answer-leakage scorers plus the dataset-level orchestrator.
//! * [`report`] — per-subset summaries in CSV, Markdown and JSON.

pub mod client;
pub mod enrich;
pub mod generation;
pub mod io;
pub mod metrics;
pub mod model;
pub mod report;

pub use model::{
    attach_metric, get_instance, Answer, Dataset, Entity, EntityLabel, Hint, Instance,
    MetricResult, Question, Subset,
};
