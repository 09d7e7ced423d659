//! Convergence: how far a hint narrows the field of candidate answers
//! while keeping the correct one in play.

use serde::{Deserialize, Serialize};

use super::{clamp_unit, MetricError};
use crate::client::{ChatClient, ChatMessage, ChatRequest, ClientError, ScoringBackend};
use crate::generation::parse_list_items;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub is_gold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintConvergence {
    /// Indices into [`ConvergenceReport::candidates`] the judge ruled out.
    pub eliminated: Vec<usize>,
    pub survived_gold: bool,
    pub score: f64,
    /// Set when there was no incorrect candidate to eliminate.
    pub no_incorrect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub candidates: Vec<Candidate>,
    pub per_hint: Vec<HintConvergence>,
}

fn candidate_prompt(question: &str, k: usize) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You propose possible answers to quiz questions. Reply with a numbered list of \
             short answers and nothing else.",
        ),
        ChatMessage::user(format!(
            "Question: {question}\nList {k} different plausible answers."
        )),
    ]
}

fn judge_prompt(question: &str, hint: &str, candidate: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system("You judge quiz hints. Answer with a single word: yes or no."),
        ChatMessage::user(format!(
            "Question: {question}\nHint: {hint}\nCandidate answer: {candidate}\n\
             Is the candidate still a plausible answer given the hint?"
        )),
    ]
}

/// Reads a yes/no verdict from the first word of a judge reply.
pub fn parse_judgement(reply: &str) -> Option<bool> {
    let first = reply
        .split(|c: char| !c.is_alphabetic())
        .find(|w| !w.is_empty())?
        .to_lowercase();
    match first.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Scores one hint from the candidates the judge eliminated.
///
/// The score is the eliminated fraction of incorrect candidates, forced to
/// 0 when a gold candidate is eliminated. With no incorrect candidates the
/// score is 1.
pub(crate) fn hint_score(candidates: &[Candidate], eliminated: &[usize]) -> HintConvergence {
    let incorrect = candidates.iter().filter(|c| !c.is_gold).count();
    let gold_lost = eliminated.iter().any(|&i| candidates[i].is_gold);
    let removed = eliminated
        .iter()
        .filter(|&&i| !candidates[i].is_gold)
        .count();
    let score = if incorrect == 0 {
        1.0
    } else if gold_lost {
        0.0
    } else {
        removed as f64 / incorrect as f64
    };
    HintConvergence {
        eliminated: eliminated.to_vec(),
        survived_gold: !gold_lost,
        score,
        no_incorrect: incorrect == 0,
    }
}

/// LLM-judged convergence for every hint of one question.
///
/// The chat model first lists `k` candidate answers (duplicates dropped
/// case-insensitively; a candidate is gold when it equals a gold answer
/// ignoring case and surrounding whitespace). Then, hint by hint and
/// candidate by candidate, a judge call decides whether the candidate is
/// still plausible.
pub fn convergence_llm(
    question: &str,
    gold_answers: &[&str],
    hints: &[&str],
    chat: &dyn ChatClient,
    k: usize,
    model: &str,
) -> Result<ConvergenceReport, MetricError> {
    if k < 2 {
        return Err(MetricError::InvalidParameter("k must be at least 2".into()));
    }
    let listing = chat.chat_complete(&ChatRequest::new(model, candidate_prompt(question, k)))?;
    let gold: Vec<String> = gold_answers
        .iter()
        .map(|a| a.trim().to_lowercase())
        .collect();
    let mut candidates: Vec<Candidate> = Vec::new();
    for text in parse_list_items(&listing, k) {
        let key = text.trim().to_lowercase();
        if candidates.iter().any(|c| c.text.to_lowercase() == key) {
            continue;
        }
        candidates.push(Candidate {
            is_gold: gold.contains(&key),
            text,
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::UnparseableCompletion(listing));
    }

    let mut per_hint = Vec::with_capacity(hints.len());
    for hint in hints {
        let mut eliminated = Vec::new();
        for (i, c) in candidates.iter().enumerate() {
            let req = ChatRequest::new(model, judge_prompt(question, hint, &c.text));
            let reply = chat.chat_complete(&req)?;
            match parse_judgement(&reply) {
                Some(true) => {}
                Some(false) => eliminated.push(i),
                None => return Err(MetricError::UnparseableCompletion(reply)),
            }
        }
        per_hint.push(hint_score(&candidates, &eliminated));
    }
    Ok(ConvergenceReport {
        candidates,
        per_hint,
    })
}

/// Delegates hints to a trained scorer (specificity classifier or
/// convergence regressor) and clamps each result to `[0, 1]`.
pub fn convergence_scored(
    hints: &[String],
    scorer: &dyn ScoringBackend,
) -> Result<Vec<f64>, MetricError> {
    if hints.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.score(hints)?;
    if scores.len() != hints.len() {
        return Err(ClientError::Decode(format!(
            "expected {} scores, got {}",
            hints.len(),
            scores.len()
        ))
        .into());
    }
    Ok(scores.into_iter().map(clamp_unit).collect())
}
