//! Familiarity: how well known a text's words and entities are.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde_json::json;

use super::{MetricError, MetricOutput};
use crate::client::PageviewClient;
use crate::enrich::{is_stopword, tokenize};

/// Token → familiarity in `[0, 1]`, usually a normalized corpus frequency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable {
    values: HashMap<String, f64>,
}

impl FrequencyTable {
    pub fn get(&self, token: &str) -> Option<f64> {
        self.values.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        FrequencyTable {
            values: iter
                .into_iter()
                .map(|(k, v)| (k.into().to_lowercase(), v))
                .collect(),
        }
    }
}

/// Reads `token<TAB>value` lines. Blank lines are skipped; values must lie
/// in `[0, 1]`. Tokens are lowercased to match the tokenizer.
pub fn read_frequency_table<R: BufRead>(reader: R) -> Result<FrequencyTable, MetricError> {
    let mut values = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricError::Table(e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| MetricError::Table(format!("line {}: {why}", n + 1));
        let (token, value) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected token<TAB>value"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| bad("value is not a number"))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(bad("value outside [0, 1]"));
        }
        values.entry(token.trim().to_lowercase()).or_insert(value);
    }
    Ok(FrequencyTable { values })
}

pub fn load_frequency_table(path: &Path) -> Result<FrequencyTable, MetricError> {
    let file = std::fs::File::open(path)
        .map_err(|e| MetricError::Table(format!("{}: {e}", path.display())))?;
    read_frequency_table(std::io::BufReader::new(file))
}

/// Mean familiarity over the text's tokens; unknown tokens count as 0.
pub fn familiarity_wordfreq(
    text: &str,
    table: &FrequencyTable,
    include_stopwords: bool,
) -> MetricOutput {
    let tokens: Vec<String> = tokenize(text)
        .into_iter()
        .filter(|t| include_stopwords || !is_stopword(t))
        .collect();
    if tokens.is_empty() {
        return MetricOutput::flagged(0.0, json!({"empty": true}));
    }
    let sum: f64 = tokens.iter().map(|t| table.get(t).unwrap_or(0.0)).sum();
    MetricOutput::new(sum / tokens.len() as f64)
}

/// `min(1, log10(1 + views) / 6)`: a million views in the window saturates.
pub fn entity_familiarity(views: u64) -> f64 {
    ((1.0 + views as f64).log10() / 6.0).min(1.0)
}

/// Mean pageview familiarity over entity surface forms. Without entities
/// the text has nothing unfamiliar in it and scores 1 with a flag.
pub fn familiarity_wikipedia(
    entities: &[&str],
    pageviews: &dyn PageviewClient,
    window_days: u32,
) -> Result<MetricOutput, MetricError> {
    if entities.is_empty() {
        return Ok(MetricOutput::flagged(1.0, json!({"no_entity": true})));
    }
    let mut views = Vec::with_capacity(entities.len());
    for e in entities {
        views.push(pageviews.pageviews(e, window_days)?.views);
    }
    let mean = views.iter().map(|&v| entity_familiarity(v)).sum::<f64>() / views.len() as f64;
    Ok(MetricOutput::flagged(mean, json!({"views": views})))
}
