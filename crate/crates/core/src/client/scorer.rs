use serde_json::{json, Value};

use super::http::Endpoint;
use super::ClientError;

/// A trained scorer hosted elsewhere (specificity, convergence or
/// readability models): one score per input text.
pub trait ScoringBackend: Send + Sync {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ClientError>;
}

impl<T: ScoringBackend + ?Sized> ScoringBackend for std::sync::Arc<T> {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ClientError> {
        (**self).score(texts)
    }
}

/// `POST {"texts": [...]}` returning `{"scores": [...]}`.
pub struct RemoteScorer {
    endpoint: Endpoint,
}

impl RemoteScorer {
    /// `endpoint.base_url` is the full scoring URL.
    pub fn new(endpoint: Endpoint) -> Self {
        RemoteScorer { endpoint }
    }
}

impl ScoringBackend for RemoteScorer {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ClientError> {
        let response = self.endpoint.post_json("", &json!({ "texts": texts }))?;
        let scores = response
            .get("scores")
            .and_then(Value::as_array)
            .ok_or_else(|| ClientError::Decode("missing `scores`".into()))?
            .iter()
            .map(|s| {
                s.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ClientError::Decode(format!("bad score {s}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if scores.len() != texts.len() {
            return Err(ClientError::Decode(format!(
                "expected {} scores, got {}",
                texts.len(),
                scores.len()
            )));
        }
        Ok(scores)
    }
}
