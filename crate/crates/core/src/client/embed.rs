use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use super::cache::{cache_key, ResponseCache};
use super::http::Endpoint;
use super::{ClientError, EmbedClient, EmbeddingVector};

/// Client for OpenAI-compatible `/embeddings` endpoints. Inputs are sent in
/// chunks of at most `batch_size`; the vector dimension is pinned by the
/// first response and checked on every later one.
pub struct OpenAiEmbed {
    endpoint: Endpoint,
    model: String,
    batch_size: usize,
    dimension: Mutex<Option<usize>>,
    cache: Option<Arc<dyn ResponseCache>>,
}

impl OpenAiEmbed {
    pub fn new(endpoint: Endpoint, model: impl Into<String>) -> Self {
        OpenAiEmbed {
            endpoint,
            model: model.into(),
            batch_size: 100,
            dimension: Mutex::new(None),
            cache: None,
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn with_cache(mut self, cache: Arc<dyn ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn embed_batch(&self, batch: &[String]) -> Result<Vec<Vec<f64>>, ClientError> {
        let body = json!({"model": self.model, "input": batch});
        let key = cache_key(&[&self.endpoint.base_url, "embeddings", &body.to_string()]);
        let cached = self
            .cache
            .as_ref()
            .and_then(|c| c.get(&key))
            .and_then(|s| serde_json::from_str::<Value>(&s).ok());
        let response = match cached {
            Some(v) => v,
            None => {
                let v = self.endpoint.post_json("embeddings", &body)?;
                if let Some(cache) = &self.cache {
                    cache.put(&key, &v.to_string());
                }
                v
            }
        };
        parse_embeddings(&response, batch.len())
    }

    fn check_dimension(&self, actual: usize) -> Result<(), ClientError> {
        let mut dim = self.dimension.lock().unwrap();
        match *dim {
            Some(expected) if expected != actual => {
                Err(ClientError::DimensionMismatch { expected, actual })
            }
            Some(_) => Ok(()),
            None => {
                *dim = Some(actual);
                Ok(())
            }
        }
    }
}

fn parse_embeddings(response: &Value, expected: usize) -> Result<Vec<Vec<f64>>, ClientError> {
    let data = response
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| ClientError::Decode("missing `data` array".into()))?;
    if data.len() != expected {
        return Err(ClientError::Decode(format!(
            "expected {expected} embeddings, got {}",
            data.len()
        )));
    }
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
    for (pos, item) in data.iter().enumerate() {
        let index = item
            .get("index")
            .and_then(Value::as_u64)
            .map_or(pos, |i| i as usize);
        let values = item
            .get("embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| ClientError::Decode("item without `embedding`".into()))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| ClientError::Decode("non-numeric embedding value".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((index, values));
    }
    rows.sort_by_key(|(i, _)| *i);
    Ok(rows.into_iter().map(|(_, v)| v).collect())
}

impl EmbedClient for OpenAiEmbed {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        if texts.is_empty() {
            return Err(ClientError::InvalidRequest("nothing to embed".into()));
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            for values in self.embed_batch(batch)? {
                self.check_dimension(values.len())?;
                out.push(EmbeddingVector {
                    values,
                    model: self.model.clone(),
                });
            }
        }
        Ok(out)
    }
}

/// Cosine similarity, or `None` when either vector has zero norm or the
/// lengths differ.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
