//! Remote backends: chat completions, embeddings, Wikipedia pageviews and
//! scoring endpoints, behind small traits so every caller can run against
//! in-process mocks.

mod cache;
mod chat;
mod embed;
mod http;
mod limit;
pub mod mock;
mod pageviews;
mod retry;
mod scorer;
mod vectors;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, DiskCache, MemoryCache, ResponseCache};
pub use chat::OpenAiChat;
pub use embed::{cosine_similarity, OpenAiEmbed};
pub use http::{Endpoint, HttpRequest, HttpResponse, HttpTransport, Method, Transport};
pub use limit::{ConcurrencyGate, TokenBucket};
pub use pageviews::{
    article_title, PageviewCount, WikimediaPageviews, DEFAULT_WINDOW_DAYS, WIKIMEDIA_PER_ARTICLE,
};
pub use retry::RetryPolicy;
pub use scorer::{RemoteScorer, ScoringBackend};
pub use vectors::{load_static_vectors, read_static_vectors, VectorError, VectorTable};

pub const ENV_CHAT_URL: &str = "HINTKIT_CHAT_URL";
pub const ENV_CHAT_KEY: &str = "HINTKIT_CHAT_KEY";
pub const ENV_EMBED_URL: &str = "HINTKIT_EMBED_URL";
pub const ENV_EMBED_KEY: &str = "HINTKIT_EMBED_KEY";
pub const ENV_OFFLINE: &str = "HINTKIT_OFFLINE";

/// True when `HINTKIT_OFFLINE` is set to a truthy value.
pub fn offline_from_env() -> bool {
    std::env::var(ENV_OFFLINE)
        .map(|v| matches!(v.trim(), "1" | "true" | "yes" | "on"))
        .unwrap_or(false)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("network access is disabled (offline mode)")]
    Offline,
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned an empty completion")]
    EmptyCompletion,
    #[error("embedding dimension changed from {expected} to {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("could not decode response: {0}")]
    Decode(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: 512,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ClientError::InvalidRequest(
                "temperature must be >= 0".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_tokens must be > 0".into()));
        }
        if self.messages.is_empty() {
            return Err(ClientError::InvalidRequest("no messages".into()));
        }
        Ok(())
    }

    /// Concatenated text of every user message; handy for mocks.
    pub fn user_text(&self) -> String {
        self.messages
            .iter()
            .filter(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model: String,
}

pub trait ChatClient: Send + Sync {
    fn chat_complete(&self, req: &ChatRequest) -> Result<String, ClientError>;

    /// Model name used when callers do not pick one.
    fn default_model(&self) -> &str {
        "default"
    }
}

pub trait EmbedClient: Send + Sync {
    /// Embeds `texts`, one vector per input in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError>;
}

pub trait PageviewClient: Send + Sync {
    fn pageviews(&self, title: &str, window_days: u32) -> Result<PageviewCount, ClientError>;
}

impl<T: ChatClient + ?Sized> ChatClient for std::sync::Arc<T> {
    fn chat_complete(&self, req: &ChatRequest) -> Result<String, ClientError> {
        (**self).chat_complete(req)
    }

    fn default_model(&self) -> &str {
        (**self).default_model()
    }
}

impl<T: EmbedClient + ?Sized> EmbedClient for std::sync::Arc<T> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        (**self).embed(texts)
    }
}

impl<T: PageviewClient + ?Sized> PageviewClient for std::sync::Arc<T> {
    fn pageviews(&self, title: &str, window_days: u32) -> Result<PageviewCount, ClientError> {
        (**self).pageviews(title, window_days)
    }
}

pub(crate) fn default_timeout() -> Duration {
    Duration::from_secs(60)
}
