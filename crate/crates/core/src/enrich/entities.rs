use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use super::stopwords::is_stopword;
use super::text::{word_spans, WordSpan};
use crate::client::{ClientError, Endpoint};
use crate::model::{Entity, EntityLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntityError {
    #[error("entity provider failed: {0}")]
    ProviderError(String),
}

impl From<ClientError> for EntityError {
    fn from(e: ClientError) -> Self {
        EntityError::ProviderError(e.to_string())
    }
}

/// Source of named entities for a text.
pub trait EntityProvider: Send + Sync {
    fn extract(&self, text: &str) -> Result<Vec<Entity>, EntityError>;
}

pub fn extract_entities(
    text: &str,
    provider: &dyn EntityProvider,
) -> Result<Vec<Entity>, EntityError> {
    provider.extract(text)
}

/// Capitalization heuristic: maximal runs of capitalized words separated
/// only by spaces become `OTHER` entities (a lone capitalized stopword such
/// as a sentence-initial "The" is skipped), and four-digit numbers become
/// `DATE` entities.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicEntities;

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn is_year(word: &str) -> bool {
    word.len() == 4 && word.bytes().all(|b| b.is_ascii_digit())
}

impl EntityProvider for HeuristicEntities {
    fn extract(&self, text: &str) -> Result<Vec<Entity>, EntityError> {
        let chars: Vec<char> = text.chars().collect();
        let spans = word_spans(text);
        let joined_by_space =
            |a: &WordSpan<'_>, b: &WordSpan<'_>| chars[a.end..b.start].iter().all(|c| *c == ' ');
        let mut out = Vec::new();
        let mut i = 0;
        while i < spans.len() {
            let word = &spans[i];
            if is_year(word.text) {
                out.extend(Entity::from_span(
                    text,
                    word.start,
                    word.end,
                    EntityLabel::Date,
                ));
                i += 1;
                continue;
            }
            if !is_capitalized(word.text) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < spans.len()
                && is_capitalized(spans[j].text)
                && joined_by_space(&spans[j - 1], &spans[j])
            {
                j += 1;
            }
            let lone_stopword = j == i + 1 && is_stopword(&word.text.to_lowercase());
            if !lone_stopword {
                out.extend(Entity::from_span(
                    text,
                    spans[i].start,
                    spans[j - 1].end,
                    EntityLabel::Other,
                ));
            }
            i = j;
        }
        Ok(out)
    }
}

/// HTTP NER service: `POST {"text": ...}` returning
/// `{"entities": [{text, label, start_index, end_index}]}`.
pub struct RemoteEntities {
    endpoint: Endpoint,
}

impl RemoteEntities {
    /// `endpoint.base_url` is the full NER URL.
    pub fn new(endpoint: Endpoint) -> Self {
        RemoteEntities { endpoint }
    }
}

#[derive(Deserialize)]
struct NerResponse {
    entities: Vec<Entity>,
}

impl EntityProvider for RemoteEntities {
    fn extract(&self, text: &str) -> Result<Vec<Entity>, EntityError> {
        let response = self.endpoint.post_json("", &json!({ "text": text }))?;
        let parsed: NerResponse = serde_json::from_value(response)
            .map_err(|e| EntityError::ProviderError(format!("bad NER response: {e}")))?;
        for e in &parsed.entities {
            if !e.is_consistent_with(text) {
                return Err(EntityError::ProviderError(format!(
                    "entity `{}` [{}, {}) does not match the text",
                    e.text, e.start_index, e.end_index
                )));
            }
        }
        Ok(parsed.entities)
    }
}
