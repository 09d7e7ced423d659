//! Relevance of a hint to its question.

use std::collections::HashMap;

use serde_json::json;

use super::{clamp_unit, MetricError, MetricOutput};
use crate::client::{
    cosine_similarity, ChatClient, ChatMessage, ChatRequest, EmbedClient, VectorTable,
};
use crate::enrich::tokenize;
use crate::generation::parse_list_items;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RougeVariant {
    Rouge1,
    Rouge2,
    RougeL,
}

impl RougeVariant {
    pub fn name(self) -> &'static str {
        match self {
            RougeVariant::Rouge1 => "rouge1",
            RougeVariant::Rouge2 => "rouge2",
            RougeVariant::RougeL => "rougeL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rouge1" => Some(RougeVariant::Rouge1),
            "rouge2" => Some(RougeVariant::Rouge2),
            "rougeL" => Some(RougeVariant::RougeL),
            _ => None,
        }
    }
}

/// ROUGE F1 between the hint (candidate) and question (reference).
pub fn relevance_rouge(hint: &str, question: &str, variant: RougeVariant) -> f64 {
    let h = tokenize(hint);
    let q = tokenize(question);
    rouge_tokens(&h, &q, variant)
}

/// ROUGE F1 over pre-tokenized sequences.
///
/// Empty sequences score 0. For ROUGE-2, two sequences too short to have
/// any bigram score 1 when they are equal and 0 otherwise.
pub fn rouge_tokens<S: AsRef<str>>(hint: &[S], question: &[S], variant: RougeVariant) -> f64 {
    if hint.is_empty() || question.is_empty() {
        return 0.0;
    }
    let (overlap, h_total, q_total) = match variant {
        RougeVariant::Rouge1 => ngram_overlap(hint, question, 1),
        RougeVariant::Rouge2 => {
            if hint.len() < 2 && question.len() < 2 {
                let equal = hint
                    .iter()
                    .map(AsRef::as_ref)
                    .eq(question.iter().map(AsRef::as_ref));
                return if equal { 1.0 } else { 0.0 };
            }
            ngram_overlap(hint, question, 2)
        }
        RougeVariant::RougeL => (lcs_length(hint, question), hint.len(), question.len()),
    };
    f1(overlap, h_total, q_total)
}

/// F1 of precision `overlap/h` and recall `overlap/q`, i.e. `2·overlap/(h+q)`.
pub(crate) fn f1(overlap: usize, h: usize, q: usize) -> f64 {
    if overlap == 0 || h == 0 || q == 0 {
        return 0.0;
    }
    (2 * overlap) as f64 / (h + q) as f64
}

fn ngram_counts<S: AsRef<str>>(seq: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for w in seq.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_default() += 1;
    }
    counts
}

/// Clipped n-gram overlap and the n-gram totals of both sides.
fn ngram_overlap<S: AsRef<str>>(hint: &[S], question: &[S], n: usize) -> (usize, usize, usize) {
    let h = ngram_counts(hint, n);
    let q = ngram_counts(question, n);
    let overlap = h
        .iter()
        .map(|(g, &c)| q.get(g).map_or(0, |&d| c.min(d)))
        .sum();
    (
        overlap,
        hint.len().saturating_sub(n - 1),
        question.len().saturating_sub(n - 1),
    )
}

/// Longest common subsequence length by bit-parallel row updates: one bit
/// per position of `a`, one multiword add per symbol of `b`.
pub(crate) fn lcs_length<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let words = a.len().div_ceil(64);
    let mut masks: HashMap<&str, Vec<u64>> = HashMap::new();
    for (i, tok) in a.iter().enumerate() {
        masks.entry(tok.as_ref()).or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
    }
    let mut v = vec![u64::MAX; words];
    for tok in b {
        let Some(m) = masks.get(tok.as_ref()) else {
            continue;
        };
        // v = (v + (v & m)) | (v & !m)
        let mut carry = 0u64;
        for k in 0..words {
            let u = v[k] & m[k];
            let (s1, c1) = v[k].overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = u64::from(c1 || c2);
            v[k] = s2 | (v[k] & !m[k]);
        }
    }
    let tail = a.len() % 64;
    let zeros: usize = v
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let w = if k == words - 1 && tail != 0 {
                w | (!0u64 << tail)
            } else {
                w
            };
            w.count_zeros() as usize
        })
        .sum();
    zeros
}

fn mean_vector(tokens: &[String], table: &VectorTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0f64; table.dimension()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += f64::from(*x);
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    Some(sum.into_iter().map(|s| s / n as f64).collect())
}

/// Cosine of mean-pooled static word vectors. Out-of-vocabulary tokens are
/// ignored; a side without any known token scores 0 with a flag.
pub fn relevance_static_embedding(
    hint: &str,
    question: &str,
    vectors: &VectorTable,
) -> MetricOutput {
    let h = mean_vector(&tokenize(hint), vectors);
    let q = mean_vector(&tokenize(question), vectors);
    match (h, q) {
        (Some(h), Some(q)) => match cosine_similarity(&h, &q) {
            Some(c) => MetricOutput::new(clamp_unit(c)),
            None => MetricOutput::flagged(0.0, json!({"zero_vector": true})),
        },
        (h, q) => MetricOutput::flagged(
            0.0,
            json!({"hint_oov": h.is_none(), "question_oov": q.is_none()}),
        ),
    }
}

/// Cosine of the two sentence embeddings, clamped to `[0, 1]`.
pub fn relevance_contextual(
    hint: &str,
    question: &str,
    embed: &dyn EmbedClient,
) -> Result<MetricOutput, MetricError> {
    let v = embed.embed(&[hint.to_string(), question.to_string()])?;
    Ok(match cosine_similarity(&v[0].values, &v[1].values) {
        Some(c) => MetricOutput::new(clamp_unit(c)),
        None => MetricOutput::flagged(0.0, json!({"zero_vector": true})),
    })
}

pub(crate) fn synthetic_question_prompt(hint: &str, m: usize) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You write quiz questions. Given a statement treated as an answer, write questions \
             that the statement answers. Reply with a numbered list and nothing else.",
        ),
        ChatMessage::user(format!(
            "Statement: {hint}\nWrite {m} different questions that this statement answers."
        )),
    ]
}

/// Answer-relevancy style score: the chat model writes `m` questions the
/// hint would answer, and the score is the mean clamped cosine between each
/// of them and the real question.
pub fn relevance_llm(
    hint: &str,
    question: &str,
    chat: &dyn ChatClient,
    embed: &dyn EmbedClient,
    m: usize,
    model: &str,
) -> Result<MetricOutput, MetricError> {
    if m == 0 {
        return Err(MetricError::InvalidParameter("m must be at least 1".into()));
    }
    let req = ChatRequest::new(model, synthetic_question_prompt(hint, m));
    let completion = chat.chat_complete(&req)?;
    let synthetic = parse_list_items(&completion, m);
    if synthetic.is_empty() {
        return Err(MetricError::UnparseableCompletion(completion));
    }
    let mut texts = vec![question.to_string()];
    texts.extend(synthetic.iter().cloned());
    let vectors = embed.embed(&texts)?;
    let real = &vectors[0].values;
    let sims: Vec<f64> = vectors[1..]
        .iter()
        .map(|v| cosine_similarity(real, &v.values).map_or(0.0, clamp_unit))
        .collect();
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    Ok(MetricOutput::flagged(
        clamp_unit(mean),
        json!({"synthetic_questions": synthetic, "similarities": sims}),
    ))
}
