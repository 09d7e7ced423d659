//! Answer leakage: how much of the answer a hint gives away.

use std::collections::HashSet;

use serde_json::json;

use super::{clamp_unit, MetricError, MetricOutput};
use crate::client::{cosine_similarity, EmbedClient};
use crate::enrich::{is_stopword, tokenize};

fn token_set(text: &str, include_stopwords: bool) -> HashSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| include_stopwords || !is_stopword(t))
        .collect()
}

/// Largest share of an answer's distinct tokens found in the hint. Answers
/// without tokens (after optional stopword removal) are skipped; if none
/// remain the score is 0 with a flag.
pub fn answerleakage_lexical(
    hint: &str,
    answers: &[&str],
    include_stopwords: bool,
) -> MetricOutput {
    let h = token_set(hint, include_stopwords);
    let mut best: Option<f64> = None;
    for answer in answers {
        let a = token_set(answer, include_stopwords);
        if a.is_empty() {
            continue;
        }
        let shared = a.iter().filter(|t| h.contains(*t)).count();
        let overlap = shared as f64 / a.len() as f64;
        best = Some(best.map_or(overlap, |b| b.max(overlap)));
    }
    match best {
        Some(v) => MetricOutput::new(v),
        None => MetricOutput::flagged(0.0, json!({"no_answer_tokens": true})),
    }
}

/// Highest clamped cosine between any hint token and any answer token,
/// over all answers. Every distinct token is embedded once, in one batch.
pub fn answerleakage_contextual(
    hint: &str,
    answers: &[&str],
    embed: &dyn EmbedClient,
) -> Result<MetricOutput, MetricError> {
    let hint_tokens = token_set(hint, true);
    let answer_tokens: HashSet<String> = answers.iter().flat_map(|a| token_set(a, true)).collect();
    if hint_tokens.is_empty() || answer_tokens.is_empty() {
        return Ok(MetricOutput::flagged(0.0, json!({"empty": true})));
    }
    let mut vocab: Vec<String> = hint_tokens.union(&answer_tokens).cloned().collect();
    vocab.sort();
    let vectors = embed.embed(&vocab)?;
    let lookup = |t: &String| &vectors[vocab.binary_search(t).expect("token in vocab")].values;
    let mut best = 0.0f64;
    for h in &hint_tokens {
        for a in &answer_tokens {
            let sim = cosine_similarity(lookup(h), lookup(a)).map_or(0.0, clamp_unit);
            best = best.max(sim);
        }
    }
    Ok(MetricOutput::new(best))
}
