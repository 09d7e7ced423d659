use std::fmt;

use crate::model::{Dataset, Entity, MetricMap, MetricRange};

/// One broken invariant, located by a JSON pointer into the canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Escapes a map key for use as a JSON pointer segment.
pub(crate) fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// Checks every model invariant. Returns an empty list for a valid dataset.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if dataset.version.is_empty() {
        out.push(Violation::new("/version", "version must not be empty"));
    }
    for (key, subset) in &dataset.subsets {
        let base = format!("/subsets/{}", escape_pointer(key));
        if key.is_empty() {
            out.push(Violation::new("/subsets", "subset name must not be empty"));
        }
        if subset.name != *key {
            out.push(Violation::new(
                format!("{base}/name"),
                format!(
                    "subset name `{}` does not match its key `{key}`",
                    subset.name
                ),
            ));
        }
        for (q_id, instance) in &subset.instances {
            if q_id.is_empty() {
                out.push(Violation::new(
                    format!("{base}/instances"),
                    "q_id must not be empty",
                ));
            }
            let ibase = format!("{base}/instances/{}", escape_pointer(q_id));
            let q = &instance.question;
            check_unit(
                &mut out,
                &format!("{ibase}/question"),
                &q.text,
                &q.entities,
                &q.metrics,
            );
            for (i, a) in instance.answers.iter().enumerate() {
                check_unit(
                    &mut out,
                    &format!("{ibase}/answers/{i}"),
                    &a.text,
                    &a.entities,
                    &a.metrics,
                );
            }
            for (i, h) in instance.hints.iter().enumerate() {
                check_unit(
                    &mut out,
                    &format!("{ibase}/hints/{i}"),
                    &h.text,
                    &h.entities,
                    &h.metrics,
                );
            }
        }
    }
    out
}

fn check_unit(
    out: &mut Vec<Violation>,
    base: &str,
    text: &str,
    entities: &[Entity],
    metrics: &MetricMap,
) {
    if text.is_empty() {
        out.push(Violation::new(
            format!("{base}/text"),
            "text must not be empty",
        ));
    }
    for (i, e) in entities.iter().enumerate() {
        if !e.is_consistent_with(text) {
            out.push(Violation::new(
                format!("{base}/entities/{i}"),
                format!(
                    "entity `{}` [{}, {}) does not match its parent text",
                    e.text, e.start_index, e.end_index
                ),
            ));
        }
    }
    for (name, metric) in metrics {
        let path = format!("{base}/metrics/{}", escape_pointer(name));
        if name.is_empty() {
            out.push(Violation::new(path, "metric name must not be empty"));
        } else if !metric.value.is_finite() || !MetricRange::for_name(name).contains(metric.value) {
            out.push(Violation::new(
                path,
                format!("value {} outside the range of `{name}`", metric.value),
            ));
        }
    }
}
