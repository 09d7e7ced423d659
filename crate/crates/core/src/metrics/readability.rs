//! Readability: classic formulas, a loadable linear scorer, and an LLM
//! judge. Every method reports a level: 0 (Beginner), 1 (Intermediate) or
//! 2 (Advanced).

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{MetricError, MetricOutput};
use crate::client::{ChatClient, ChatMessage, ChatRequest};
use crate::enrich::{analyze_text, is_stopword, TextStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formula {
    Flesch,
    GunningFog,
    ColemanLiau,
    Smog,
    Ari,
}

impl Formula {
    pub const ALL: [Formula; 5] = [
        Formula::Flesch,
        Formula::GunningFog,
        Formula::ColemanLiau,
        Formula::Smog,
        Formula::Ari,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formula::Flesch => "flesch",
            Formula::GunningFog => "gunning_fog",
            Formula::ColemanLiau => "coleman_liau",
            Formula::Smog => "smog",
            Formula::Ari => "ari",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Formula::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Raw formula value over precomputed statistics (`words > 0`).
    pub fn raw(self, s: &TextStats) -> f64 {
        let words = s.words as f64;
        let sentences = s.sentences as f64;
        let syllables = s.syllables() as f64;
        let complex = s.complex_words() as f64;
        let letters = s.letters as f64;
        match self {
            Formula::Flesch => 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words),
            Formula::GunningFog => 0.4 * (words / sentences + 100.0 * complex / words),
            Formula::ColemanLiau => {
                let l = letters / words * 100.0;
                let s100 = sentences / words * 100.0;
                0.0588 * l - 0.296 * s100 - 15.8
            }
            Formula::Smog => 1.0430 * (complex * 30.0 / sentences).sqrt() + 3.1291,
            Formula::Ari => 4.71 * (letters / words) + 0.5 * (words / sentences) - 21.43,
        }
    }
}

/// Cut-points turning raw formula values into levels.
///
/// Flesch is an ease score (higher is easier): `>= easy` is 0, `>= hard`
/// is 1, anything lower is 2. Grade-style formulas (higher is harder):
/// `<= easy` is 0, `<= hard` is 1, anything higher is 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Banding {
    pub flesch_easy: f64,
    pub flesch_hard: f64,
    pub grade_easy: f64,
    pub grade_hard: f64,
}

impl Default for Banding {
    fn default() -> Self {
        Banding {
            flesch_easy: 70.0,
            flesch_hard: 50.0,
            grade_easy: 8.0,
            grade_hard: 12.0,
        }
    }
}

impl Banding {
    pub fn level(&self, formula: Formula, raw: f64) -> u8 {
        match formula {
            Formula::Flesch => {
                if raw >= self.flesch_easy {
                    0
                } else if raw >= self.flesch_hard {
                    1
                } else {
                    2
                }
            }
            _ => {
                if raw <= self.grade_easy {
                    0
                } else if raw <= self.grade_hard {
                    1
                } else {
                    2
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulaScore {
    pub raw: f64,
    pub level: u8,
}

pub fn readability_traditional(
    text: &str,
    formula: Formula,
    banding: &Banding,
) -> Result<FormulaScore, MetricError> {
    let stats = analyze_text(text);
    if stats.words == 0 {
        return Err(MetricError::EmptyText);
    }
    let raw = formula.raw(&stats);
    Ok(FormulaScore {
        raw,
        level: banding.level(formula, raw),
    })
}

/// Features available to [`LinearScorer`] files.
pub const FEATURES: [&str; 6] = [
    "words_per_sentence",
    "syllables_per_word",
    "complex_word_ratio",
    "letters_per_word",
    "type_token_ratio",
    "stopword_ratio",
];

pub fn feature_value(name: &str, s: &TextStats) -> Option<f64> {
    let words = s.words as f64;
    Some(match name {
        "words_per_sentence" => words / s.sentences as f64,
        "syllables_per_word" => s.syllables() as f64 / words,
        "complex_word_ratio" => s.complex_words() as f64 / words,
        "letters_per_word" => s.letters as f64 / words,
        "type_token_ratio" => {
            let distinct: std::collections::HashSet<&String> = s.tokens.iter().collect();
            distinct.len() as f64 / words
        }
        "stopword_ratio" => s.tokens.iter().filter(|t| is_stopword(t)).count() as f64 / words,
        _ => return None,
    })
}

/// A linear model over text features: `level = band(w·x + b)`, where a
/// score below `class_thresholds[0]` is 0, below `class_thresholds[1]` is 1,
/// and 2 otherwise. Stands in for trained ML readability classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearScorer {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_thresholds: [f64; 2],
}

impl LinearScorer {
    pub fn validate(&self) -> Result<(), MetricError> {
        if self.weights.len() != self.feature_names.len() {
            return Err(MetricError::InvalidParameter(format!(
                "{} weights for {} features",
                self.weights.len(),
                self.feature_names.len()
            )));
        }
        if let Some(bad) = self
            .feature_names
            .iter()
            .find(|f| !FEATURES.contains(&f.as_str()))
        {
            return Err(MetricError::UnknownFeature(bad.clone()));
        }
        let [lo, hi] = self.class_thresholds;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(MetricError::InvalidParameter(
                "class_thresholds must be finite and ascending".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        let scorer: LinearScorer = serde_json::from_str(text)
            .map_err(|e| MetricError::InvalidParameter(format!("scorer file: {e}")))?;
        scorer.validate()?;
        Ok(scorer)
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetricError::InvalidParameter(format!("{}: {e}", path.display())))?;
        LinearScorer::from_json(&text)
    }

    pub fn score(&self, stats: &TextStats) -> Result<f64, MetricError> {
        let mut total = self.bias;
        for (name, w) in self.feature_names.iter().zip(&self.weights) {
            let x = feature_value(name, stats)
                .ok_or_else(|| MetricError::UnknownFeature(name.clone()))?;
            total += w * x;
        }
        Ok(total)
    }

    pub fn band(&self, score: f64) -> u8 {
        let [lo, hi] = self.class_thresholds;
        if score < lo {
            0
        } else if score < hi {
            1
        } else {
            2
        }
    }
}

pub fn readability_linear(text: &str, scorer: &LinearScorer) -> Result<MetricOutput, MetricError> {
    scorer.validate()?;
    let stats = analyze_text(text);
    if stats.words == 0 {
        return Err(MetricError::EmptyText);
    }
    let score = scorer.score(&stats)?;
    Ok(MetricOutput::flagged(
        f64::from(scorer.band(score)),
        json!({ "score": score }),
    ))
}

const LEVEL_WORDS: [&str; 3] = ["beginner", "intermediate", "advanced"];

/// Maps a judge reply to a level. Accepts the bare label in any case with
/// surrounding punctuation, or a reply containing exactly one of the three
/// labels as a word.
pub fn parse_level(reply: &str) -> Option<u8> {
    let lowered = reply.to_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .collect();
    let mut found = LEVEL_WORDS
        .iter()
        .enumerate()
        .filter(|(_, label)| words.contains(label))
        .map(|(i, _)| i as u8);
    match (found.next(), found.next()) {
        (Some(level), None) => Some(level),
        _ => None,
    }
}

pub(crate) fn readability_prompt(text: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You rate how easy a text is to read. Answer with exactly one word: \
             Beginner, Intermediate, or Advanced.",
        ),
        ChatMessage::user(format!("Text: {text}\nReadability level:")),
    ]
}

pub fn readability_llm(text: &str, chat: &dyn ChatClient, model: &str) -> Result<u8, MetricError> {
    let reply = chat.chat_complete(&ChatRequest::new(model, readability_prompt(text)))?;
    parse_level(&reply).ok_or(MetricError::UnparseableCompletion(reply))
}
