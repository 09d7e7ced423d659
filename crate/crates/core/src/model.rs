//! In-memory dataset model: datasets, subsets, instances and the text units
//! (questions, answers, hints) that carry entities and metric results.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Open key/value map attached to every level of the model.
pub type Metadata = serde_json::Map<String, Value>;

/// Metric results keyed by their namespaced name (`metric/method[/variant]`).
pub type MetricMap = BTreeMap<String, Metric>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown subset `{0}`")]
    UnknownSubset(String),
    #[error("unknown instance `{q_id}` in subset `{subset}`")]
    UnknownInstance { subset: String, q_id: String },
    #[error("metric name must not be empty")]
    EmptyMetricName,
    #[error("metric `{name}` value {value} outside its allowed range")]
    MetricOutOfRange { name: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub name: String,
    pub version: String,
    pub url: String,
    pub description: String,
    pub metadata: Metadata,
    #[serde(deserialize_with = "crate::io::unique_map::deserialize")]
    pub subsets: IndexMap<String, Subset>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Dataset {
            name: name.into(),
            version: version.into(),
            url: String::new(),
            description: String::new(),
            metadata: Metadata::new(),
            subsets: IndexMap::new(),
        }
    }

    /// Returns the subset with `name`, creating an empty one if absent.
    pub fn subset_mut(&mut self, name: &str) -> &mut Subset {
        self.subsets
            .entry(name.to_string())
            .or_insert_with(|| Subset::new(name))
    }

    pub fn num_hints(&self) -> usize {
        self.subsets.values().map(Subset::num_hints).sum()
    }

    pub fn num_instances(&self) -> usize {
        self.subsets.values().map(|s| s.instances.len()).sum()
    }
}

/// Looks up an instance by subset name and question id.
pub fn get_instance<'a>(
    dataset: &'a Dataset,
    subset: &str,
    q_id: &str,
) -> Result<&'a Instance, ModelError> {
    let s = dataset
        .subsets
        .get(subset)
        .ok_or_else(|| ModelError::UnknownSubset(subset.to_string()))?;
    s.instances
        .get(q_id)
        .ok_or_else(|| ModelError::UnknownInstance {
            subset: subset.to_string(),
            q_id: q_id.to_string(),
        })
}

pub fn get_instance_mut<'a>(
    dataset: &'a mut Dataset,
    subset: &str,
    q_id: &str,
) -> Result<&'a mut Instance, ModelError> {
    let s = dataset
        .subsets
        .get_mut(subset)
        .ok_or_else(|| ModelError::UnknownSubset(subset.to_string()))?;
    s.instances
        .get_mut(q_id)
        .ok_or_else(|| ModelError::UnknownInstance {
            subset: subset.to_string(),
            q_id: q_id.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subset {
    pub name: String,
    pub metadata: Metadata,
    /// Instances keyed by `q_id`. Iteration order is lexicographic.
    #[serde(deserialize_with = "crate::io::unique_map::deserialize")]
    pub instances: BTreeMap<String, Instance>,
}

impl Subset {
    pub fn new(name: impl Into<String>) -> Self {
        Subset {
            name: name.into(),
            metadata: Metadata::new(),
            instances: BTreeMap::new(),
        }
    }

    pub fn num_hints(&self) -> usize {
        self.instances.values().map(|i| i.hints.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub question: Question,
    pub answers: Vec<Answer>,
    /// Order is meaningful and preserved through serialization.
    pub hints: Vec<Hint>,
    pub metadata: Metadata,
}

impl Instance {
    pub fn new(question: Question) -> Self {
        Instance {
            question,
            answers: Vec::new(),
            hints: Vec::new(),
            metadata: Metadata::new(),
        }
    }

    pub fn with_answers<I, S>(mut self, answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.answers.extend(answers.into_iter().map(Answer::new));
        self
    }

    pub fn with_hints<I, S>(mut self, source: &str, hints: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.hints
            .extend(hints.into_iter().map(|h| Hint::new(h, source)));
        self
    }

    pub fn answer_texts(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }
}

/// Coarse TREC question classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QTypeMajor {
    #[serde(rename = "ABBR")]
    Abbreviation,
    #[serde(rename = "DESC")]
    Description,
    #[serde(rename = "ENTY")]
    Entity,
    #[serde(rename = "HUM")]
    Human,
    #[serde(rename = "LOC")]
    Location,
    #[serde(rename = "NUM")]
    Numeric,
}

impl QTypeMajor {
    pub fn code(self) -> &'static str {
        match self {
            QTypeMajor::Abbreviation => "ABBR",
            QTypeMajor::Description => "DESC",
            QTypeMajor::Entity => "ENTY",
            QTypeMajor::Human => "HUM",
            QTypeMajor::Location => "LOC",
            QTypeMajor::Numeric => "NUM",
        }
    }
}

impl fmt::Display for QTypeMajor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionType {
    pub major: QTypeMajor,
    pub minor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub text: String,
    pub question_type: Option<QuestionType>,
    pub entities: Vec<Entity>,
    pub metrics: MetricMap,
    pub metadata: Metadata,
}

impl Question {
    pub fn new(text: impl Into<String>) -> Self {
        Question {
            text: text.into(),
            question_type: None,
            entities: Vec::new(),
            metrics: MetricMap::new(),
            metadata: Metadata::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answer {
    pub text: String,
    pub entities: Vec<Entity>,
    pub metrics: MetricMap,
    pub metadata: Metadata,
}

impl Answer {
    pub fn new(text: impl Into<String>) -> Self {
        Answer {
            text: text.into(),
            entities: Vec::new(),
            metrics: MetricMap::new(),
            metadata: Metadata::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hint {
    pub text: String,
    /// Provenance label, e.g. `human` or `model:<name>/answer-aware`.
    pub source: String,
    pub entities: Vec<Entity>,
    pub metrics: MetricMap,
    pub metadata: Metadata,
}

impl Hint {
    pub fn new(text: impl Into<String>, source: impl Into<String>) -> Self {
        Hint {
            text: text.into(),
            source: source.into(),
            entities: Vec::new(),
            metrics: MetricMap::new(),
            metadata: Metadata::new(),
        }
    }
}

/// NER label set shared by every entity provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityLabel {
    Person,
    Norp,
    Fac,
    Org,
    Gpe,
    Loc,
    Product,
    Event,
    WorkOfArt,
    Law,
    Language,
    Date,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
    Other,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 19] = [
        EntityLabel::Person,
        EntityLabel::Norp,
        EntityLabel::Fac,
        EntityLabel::Org,
        EntityLabel::Gpe,
        EntityLabel::Loc,
        EntityLabel::Product,
        EntityLabel::Event,
        EntityLabel::WorkOfArt,
        EntityLabel::Law,
        EntityLabel::Language,
        EntityLabel::Date,
        EntityLabel::Time,
        EntityLabel::Percent,
        EntityLabel::Money,
        EntityLabel::Quantity,
        EntityLabel::Ordinal,
        EntityLabel::Cardinal,
        EntityLabel::Other,
    ];
}

impl FromStr for EntityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| format!("unknown entity label `{s}`"))
    }
}

/// A labelled span of its parent text. Offsets count Unicode scalar values;
/// `start_index` is inclusive and `end_index` exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub text: String,
    pub label: EntityLabel,
    pub start_index: usize,
    pub end_index: usize,
}

impl Entity {
    /// Builds an entity from a char span of `parent`, or `None` when the span
    /// is empty or out of bounds.
    pub fn from_span(parent: &str, start: usize, end: usize, label: EntityLabel) -> Option<Self> {
        if start >= end {
            return None;
        }
        let text = char_slice(parent, start, end)?;
        Some(Entity {
            text: text.to_string(),
            label,
            start_index: start,
            end_index: end,
        })
    }

    /// True when the offsets lie inside `parent` and slice to `self.text`.
    pub fn is_consistent_with(&self, parent: &str) -> bool {
        self.start_index < self.end_index
            && char_slice(parent, self.start_index, self.end_index) == Some(self.text.as_str())
    }
}

/// Slices `s` by char offsets `[start, end)`.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = s
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(s.len()));
    let begin = indices.nth(start)?;
    let stop = if end == start {
        begin
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&s[begin..stop])
}

/// A stored metric value. `detail` holds per-method diagnostics such as the
/// raw formula output behind a readability level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metric {
    pub value: f64,
    #[serde(default)]
    pub detail: Option<Value>,
}

/// A named metric result ready to be attached to a text unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub detail: Option<Value>,
}

impl MetricResult {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        MetricResult {
            name: name.into(),
            value,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = match detail {
            Value::Null => None,
            d => Some(d),
        };
        self
    }
}

/// Range a metric value must satisfy, derived from its name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricRange {
    UnitInterval,
    Level,
    Unchecked,
}

impl MetricRange {
    pub fn for_name(name: &str) -> Self {
        match name.split('/').next().unwrap_or_default() {
            "relevance" | "convergence" | "familiarity" | "answerleakage" => {
                MetricRange::UnitInterval
            }
            "readability" => MetricRange::Level,
            _ => MetricRange::Unchecked,
        }
    }

    pub fn contains(self, value: f64) -> bool {
        match self {
            MetricRange::UnitInterval => (0.0..=1.0).contains(&value),
            MetricRange::Level => value == 0.0 || value == 1.0 || value == 2.0,
            MetricRange::Unchecked => value.is_finite(),
        }
    }
}

/// Anything that owns a metrics map: questions, answers and hints.
pub trait Scored {
    fn metrics(&self) -> &MetricMap;
    fn metrics_mut(&mut self) -> &mut MetricMap;
    fn text(&self) -> &str;
    fn entities(&self) -> &[Entity];
}

macro_rules! impl_scored {
    ($($ty:ty),*) => {$(
        impl Scored for $ty {
            fn metrics(&self) -> &MetricMap { &self.metrics }
            fn metrics_mut(&mut self) -> &mut MetricMap { &mut self.metrics }
            fn text(&self) -> &str { &self.text }
            fn entities(&self) -> &[Entity] { &self.entities }
        }
    )*};
}

impl_scored!(Question, Answer, Hint);

/// Stores `result` on `target`, replacing any earlier value with the same
/// name. Values for known metric prefixes are range-checked.
pub fn attach_metric<T: Scored + ?Sized>(
    target: &mut T,
    result: MetricResult,
) -> Result<(), ModelError> {
    if result.name.is_empty() {
        return Err(ModelError::EmptyMetricName);
    }
    if !result.value.is_finite() || !MetricRange::for_name(&result.name).contains(result.value) {
        return Err(ModelError::MetricOutOfRange {
            name: result.name,
            value: result.value,
        });
    }
    let detail = result.detail.filter(|d| !d.is_null());
    target.metrics_mut().insert(
        result.name,
        Metric {
            value: result.value,
            detail,
        },
    );
    Ok(())
}
