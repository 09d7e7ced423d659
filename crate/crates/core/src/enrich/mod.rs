//! Shared text analytics (tokens, sentences, syllables, stopwords) and the
//! two built-in enrichers: question typing and entity extraction.

mod entities;
mod qtype;
pub mod stopwords;
mod text;

pub use entities::{
    extract_entities, EntityError, EntityProvider, HeuristicEntities, RemoteEntities,
};
pub use qtype::{classify_question_type, classify_text};
pub use stopwords::is_stopword;
pub use text::{
    analyze_text, count_sentences, count_syllables, tokenize, word_spans, TextStats, WordSpan,
};

use crate::model::Dataset;

/// Assigns question types and fills every empty entity list in `dataset`.
pub fn enrich_dataset(
    dataset: &mut Dataset,
    provider: &dyn EntityProvider,
) -> Result<(), EntityError> {
    for subset in dataset.subsets.values_mut() {
        for instance in subset.instances.values_mut() {
            let q = &mut instance.question;
            q.question_type = Some(classify_question_type(q));
            if q.entities.is_empty() {
                q.entities = provider.extract(&q.text)?;
            }
            for a in &mut instance.answers {
                if a.entities.is_empty() {
                    a.entities = provider.extract(&a.text)?;
                }
            }
            for h in &mut instance.hints {
                if h.entities.is_empty() {
                    h.entities = provider.extract(&h.text)?;
                }
            }
        }
    }
    Ok(())
}
