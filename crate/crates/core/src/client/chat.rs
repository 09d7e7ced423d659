use std::sync::Arc;

use serde_json::Value;

use super::cache::{cache_key, ResponseCache};
use super::http::Endpoint;
use super::{ChatClient, ChatRequest, ClientError};

/// Client for any OpenAI-compatible `/chat/completions` endpoint, local or
/// hosted.
pub struct OpenAiChat {
    endpoint: Endpoint,
    model: String,
    cache: Option<Arc<dyn ResponseCache>>,
}

impl OpenAiChat {
    pub fn new(endpoint: Endpoint, model: impl Into<String>) -> Self {
        OpenAiChat {
            endpoint,
            model: model.into(),
            cache: None,
        }
    }

    pub fn with_cache(mut self, cache: Arc<dyn ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }
}

impl ChatClient for OpenAiChat {
    fn chat_complete(&self, req: &ChatRequest) -> Result<String, ClientError> {
        req.validate()?;
        let body = serde_json::to_value(req).expect("chat requests serialize");
        let key = cache_key(&[&self.endpoint.base_url, "chat", &body.to_string()]);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let response = self.endpoint.post_json("chat/completions", &body)?;
        let text = extract_content(&response)?;
        if text.trim().is_empty() {
            return Err(ClientError::EmptyCompletion);
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &text);
        }
        Ok(text)
    }

    fn default_model(&self) -> &str {
        &self.model
    }
}

fn extract_content(response: &Value) -> Result<String, ClientError> {
    let choice = response
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or(ClientError::EmptyCompletion)?;
    let content = choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .ok_or_else(|| ClientError::Decode("choice has no message content".into()))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Null => Err(ClientError::EmptyCompletion),
        other => Err(ClientError::Decode(format!("unexpected content {other}"))),
    }
}
