//! In-process test doubles for every client trait. They never touch the
//! network and are deterministic unless a closure makes them otherwise.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::http::{HttpRequest, HttpResponse, Transport};
use super::{
    ChatClient, ChatRequest, ClientError, EmbedClient, EmbeddingVector, PageviewClient,
    PageviewCount, ScoringBackend,
};

/// Replays a fixed sequence of transport outcomes; once the script is
/// exhausted the last outcome repeats.
pub struct ScriptedTransport {
    script: Mutex<VecDeque<Result<HttpResponse, ClientError>>>,
    last: Mutex<Option<Result<HttpResponse, ClientError>>>,
    requests: Mutex<Vec<HttpRequest>>,
}

impl ScriptedTransport {
    pub fn new(script: Vec<Result<HttpResponse, ClientError>>) -> Self {
        ScriptedTransport {
            script: Mutex::new(script.into()),
            last: Mutex::new(None),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn repeat(outcome: Result<HttpResponse, ClientError>) -> Self {
        ScriptedTransport::new(vec![outcome])
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, ClientError> {
        self.requests.lock().unwrap().push(req.clone());
        let next = self.script.lock().unwrap().pop_front();
        let mut last = self.last.lock().unwrap();
        match next {
            Some(outcome) => {
                *last = Some(outcome.clone());
                outcome
            }
            None => last
                .clone()
                .unwrap_or_else(|| Err(ClientError::Transport("empty script".into()))),
        }
    }
}

type ChatFn = dyn Fn(&ChatRequest) -> Result<String, ClientError> + Send + Sync;

/// Chat client backed by a closure.
pub struct FnChat {
    f: Box<ChatFn>,
    calls: AtomicUsize,
}

impl FnChat {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, ClientError> + Send + Sync + 'static,
    {
        FnChat {
            f: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Always answers `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        FnChat::new(move |_| Ok(text.clone()))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for FnChat {
    fn chat_complete(&self, req: &ChatRequest) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(req)
    }

    fn default_model(&self) -> &str {
        "mock"
    }
}

/// Chat client answering from a queue, in call order.
pub struct ScriptedChat {
    replies: Mutex<VecDeque<Result<String, ClientError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedChat {
            replies: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatClient for ScriptedChat {
    fn chat_complete(&self, req: &ChatRequest) -> Result<String, ClientError> {
        self.requests.lock().unwrap().push(req.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or(Err(ClientError::EmptyCompletion))
    }

    fn default_model(&self) -> &str {
        "scripted"
    }
}

type EmbedFn = dyn Fn(&str) -> Vec<f64> + Send + Sync;

/// Embedding client mapping each text through a closure.
pub struct FnEmbed {
    f: Box<EmbedFn>,
    calls: AtomicUsize,
}

impl FnEmbed {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&str) -> Vec<f64> + Send + Sync + 'static,
    {
        FnEmbed {
            f: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Looks texts up in `table`; unknown texts map to `fallback`.
    pub fn table(table: HashMap<String, Vec<f64>>, fallback: Vec<f64>) -> Self {
        FnEmbed::new(move |t| table.get(t).cloned().unwrap_or_else(|| fallback.clone()))
    }

    /// Deterministic pseudo-random `dim`-dimensional vector per distinct
    /// text, so equal texts embed identically.
    pub fn hashed(dim: usize) -> Self {
        FnEmbed::new(move |t| hashed_vector(t, dim))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn hashed_vector(text: &str, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let digest = Sha256::new()
                .chain_update(text.as_bytes())
                .chain_update((i as u64).to_le_bytes())
                .finalize();
            let x = u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]]);
            f64::from(x) / f64::from(u32::MAX) * 2.0 - 1.0
        })
        .collect()
}

impl EmbedClient for FnEmbed {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(texts
            .iter()
            .map(|t| EmbeddingVector {
                values: (self.f)(t),
                model: "mock".into(),
            })
            .collect())
    }
}

/// Pageview client answering from a map; absent titles are "not found".
pub struct MapPageviews {
    views: HashMap<String, u64>,
    calls: AtomicUsize,
}

impl MapPageviews {
    pub fn new<I, S>(views: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        MapPageviews {
            views: views.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl PageviewClient for MapPageviews {
    fn pageviews(&self, title: &str, _window_days: u32) -> Result<PageviewCount, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(match self.views.get(title) {
            Some(&views) => PageviewCount { views, found: true },
            None => PageviewCount {
                views: 0,
                found: false,
            },
        })
    }
}

type ScoreFn = dyn Fn(&str) -> Result<f64, ClientError> + Send + Sync;

/// Scoring backend backed by a closure.
pub struct FnScorer {
    f: Box<ScoreFn>,
}

impl FnScorer {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&str) -> Result<f64, ClientError> + Send + Sync + 'static,
    {
        FnScorer { f: Box::new(f) }
    }

    pub fn constant(value: f64) -> Self {
        FnScorer::new(move |_| Ok(value))
    }
}

impl ScoringBackend for FnScorer {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, ClientError> {
        texts.iter().map(|t| (self.f)(t)).collect()
    }
}
