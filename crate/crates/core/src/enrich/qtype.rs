//! Rule-based TREC coarse question typing: a wh-word decides the class,
//! refined for "what"/"which" by nearby head nouns.

use super::text::tokenize;
use crate::model::{QTypeMajor, Question, QuestionType};

const PERSON_NOUNS: &[&str] = &[
    "person",
    "people",
    "man",
    "woman",
    "actor",
    "actress",
    "author",
    "writer",
    "singer",
    "president",
    "king",
    "queen",
    "player",
    "scientist",
    "inventor",
    "leader",
    "composer",
    "artist",
    "painter",
    "poet",
    "politician",
    "emperor",
];
const PLACE_NOUNS: &[(&str, &str)] = &[
    ("city", "LOC:city"),
    ("town", "LOC:city"),
    ("capital", "LOC:city"),
    ("country", "LOC:country"),
    ("nation", "LOC:country"),
    ("state", "LOC:state"),
    ("mountain", "LOC:mount"),
    ("place", "LOC:other"),
    ("continent", "LOC:other"),
    ("river", "LOC:other"),
    ("island", "LOC:other"),
    ("ocean", "LOC:other"),
    ("sea", "LOC:other"),
    ("region", "LOC:other"),
];
const DATE_NOUNS: &[&str] = &["year", "date", "day", "month", "century", "decade"];
const ABBREVIATION_NOUNS: &[&str] = &["abbreviation", "acronym"];
const DEFINITION_WORDS: &[&str] = &["mean", "means", "meaning", "definition"];

/// Words skipped when looking for the head noun after "what"/"which".
const FILLERS: &[&str] = &[
    "is", "was", "are", "were", "the", "a", "an", "does", "did", "do", "of", "name", "kind",
    "type", "famous", "first", "last", "largest", "biggest", "smallest", "same",
];

fn unknown(major: QTypeMajor) -> QuestionType {
    QuestionType {
        major,
        minor: "unknown".into(),
    }
}

fn typed(major: QTypeMajor, minor: &str) -> QuestionType {
    QuestionType {
        major,
        minor: minor.into(),
    }
}

/// Classifies a question from its text alone. Questions without a wh-word
/// fall back to `DESC` / `unknown`; "what"/"which" questions without a
/// recognized head noun fall back to `ENTY` / `unknown`.
pub fn classify_text(text: &str) -> QuestionType {
    let tokens = tokenize(text);
    let Some(pos) = tokens.iter().position(|t| {
        matches!(
            t.as_str(),
            "who" | "whom" | "whose" | "where" | "when" | "how" | "what" | "which" | "why"
        )
    }) else {
        return unknown(QTypeMajor::Description);
    };
    let next = tokens.get(pos + 1).map(String::as_str);
    match tokens[pos].as_str() {
        "who" | "whom" | "whose" => typed(QTypeMajor::Human, "HUM:ind"),
        "where" => typed(QTypeMajor::Location, "LOC:other"),
        "when" => typed(QTypeMajor::Numeric, "NUM:date"),
        "why" => typed(QTypeMajor::Description, "DESC:reason"),
        "how" => match next {
            Some("many" | "much") => typed(QTypeMajor::Numeric, "NUM:count"),
            Some("long" | "old") => typed(QTypeMajor::Numeric, "NUM:period"),
            Some("far" | "tall" | "high" | "big" | "large" | "deep") => {
                typed(QTypeMajor::Numeric, "NUM:other")
            }
            _ => typed(QTypeMajor::Description, "DESC:manner"),
        },
        _ => classify_what(&tokens, pos),
    }
}

fn classify_what(tokens: &[String], pos: usize) -> QuestionType {
    let rest = &tokens[pos + 1..];
    if rest
        .iter()
        .any(|t| ABBREVIATION_NOUNS.contains(&t.as_str()))
        || rest.windows(2).any(|w| w[0] == "stand" && w[1] == "for")
    {
        return typed(QTypeMajor::Abbreviation, "ABBR:exp");
    }
    if rest.iter().any(|t| DEFINITION_WORDS.contains(&t.as_str())) {
        return typed(QTypeMajor::Description, "DESC:def");
    }
    let head = rest
        .iter()
        .map(String::as_str)
        .filter(|t| !FILLERS.contains(t))
        .take(2);
    for word in head {
        let singular = word.strip_suffix('s').unwrap_or(word);
        if PERSON_NOUNS.contains(&word) || PERSON_NOUNS.contains(&singular) {
            return typed(QTypeMajor::Human, "HUM:ind");
        }
        if let Some((_, minor)) = PLACE_NOUNS
            .iter()
            .find(|(n, _)| *n == word || *n == singular)
        {
            return typed(QTypeMajor::Location, minor);
        }
        if DATE_NOUNS.contains(&word) || DATE_NOUNS.contains(&singular) {
            return typed(QTypeMajor::Numeric, "NUM:date");
        }
    }
    unknown(QTypeMajor::Entity)
}

pub fn classify_question_type(question: &Question) -> QuestionType {
    classify_text(&question.text)
}
