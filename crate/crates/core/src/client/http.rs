use std::io::Read;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;

use super::limit::{ConcurrencyGate, TokenBucket};
use super::retry::RetryPolicy;
use super::ClientError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        HttpRequest {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &Value) -> Self {
        HttpRequest {
            method: Method::Post,
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(serde_json::to_vec(body).expect("JSON values serialize")),
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
    pub retry_after: Option<Duration>,
}

impl HttpResponse {
    pub fn ok(body: impl Into<Vec<u8>>) -> Self {
        HttpResponse {
            status: 200,
            body: body.into(),
            retry_after: None,
        }
    }

    pub fn status(status: u16) -> Self {
        HttpResponse {
            status,
            body: Vec::new(),
            retry_after: None,
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn json(&self) -> Result<Value, ClientError> {
        serde_json::from_slice(&self.body).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn body_text(&self) -> String {
        let text = String::from_utf8_lossy(&self.body);
        text.chars().take(200).collect()
    }
}

/// Moves one HTTP exchange. Non-2xx statuses are responses, not errors;
/// only failures to complete the exchange are errors.
pub trait Transport: Send + Sync {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, ClientError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, ClientError> {
        (**self).send(req)
    }
}

/// Blocking HTTP(S) transport. In offline mode every request fails before
/// touching the network.
pub struct HttpTransport {
    agent: ureq::Agent,
    offline: bool,
}

impl HttpTransport {
    pub fn new(offline: bool) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(super::default_timeout())
            .user_agent(concat!("hintkit/", env!("CARGO_PKG_VERSION")))
            .build();
        HttpTransport { agent, offline }
    }

    pub fn from_env() -> Self {
        HttpTransport::new(super::offline_from_env())
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, ClientError> {
        if self.offline {
            return Err(ClientError::Offline);
        }
        let method = match req.method {
            Method::Get => "GET",
            Method::Post => "POST",
        };
        let mut call = self.agent.request(method, &req.url);
        for (k, v) in &req.headers {
            call = call.set(k, v);
        }
        let result = match &req.body {
            Some(body) => call.send_bytes(body),
            None => call.call(),
        };
        let response = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => return Err(ClientError::Transport(t.to_string())),
        };
        let status = response.status();
        let retry_after = response
            .header("Retry-After")
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let mut body = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpResponse {
            status,
            body,
            retry_after,
        })
    }
}

/// A remote service: base URL, credentials and the guards shared by every
/// request sent to it (retry policy, rate limiter, in-flight cap).
pub struct Endpoint {
    pub base_url: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    policy: RetryPolicy,
    limiter: Option<TokenBucket>,
    gate: ConcurrencyGate,
    attempts: AtomicU64,
}

impl Endpoint {
    pub fn new(base_url: impl Into<String>, transport: Arc<dyn Transport>) -> Self {
        Endpoint {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: None,
            transport,
            policy: RetryPolicy::default(),
            limiter: None,
            gate: ConcurrencyGate::new(4),
            attempts: AtomicU64::new(0),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }

    pub fn with_retry(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_rate_limit(mut self, limiter: TokenBucket) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.gate = ConcurrencyGate::new(n);
        self
    }

    /// Total HTTP attempts made through this endpoint, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    pub fn url(&self, path: &str) -> String {
        let path = path.trim_start_matches('/');
        if path.is_empty() {
            return self.base_url.clone();
        }
        format!("{}/{}", self.base_url, path)
    }

    /// POSTs `body` to `path` and returns the decoded JSON response,
    /// retrying throttled and failed attempts per the retry policy.
    pub fn post_json(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        let mut req = HttpRequest::post_json(self.url(path), body);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        self.send(&req)?.json()
    }

    pub fn send(&self, req: &HttpRequest) -> Result<HttpResponse, ClientError> {
        let _permit = self.gate.acquire();
        let mut rng = rand::thread_rng();
        let max_attempts = self.policy.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.attempts.fetch_add(1, Ordering::Relaxed);
            let outcome = self.transport.send(req);
            let retry_after = match &outcome {
                Ok(resp) if resp.is_success() => return outcome,
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    return Err(ClientError::Auth(resp.status))
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => resp.retry_after,
                Ok(resp) => {
                    return Err(ClientError::Http {
                        status: resp.status,
                        body: resp.body_text(),
                    })
                }
                Err(ClientError::Transport(_)) => None,
                Err(_) => return outcome,
            };
            if attempt >= max_attempts {
                return match outcome {
                    Ok(resp) if resp.status == 429 => {
                        Err(ClientError::RateLimited { attempts: attempt })
                    }
                    Ok(resp) => Err(ClientError::Http {
                        status: resp.status,
                        body: resp.body_text(),
                    }),
                    Err(e) => Err(e),
                };
            }
            let mut delay = self.policy.jittered_delay(attempt - 1, &mut rng);
            if let Some(hint) = retry_after {
                delay = delay.max(hint.min(self.policy.max_backoff));
            }
            log::debug!("retrying {} after {:?} (attempt {attempt})", req.url, delay);
            std::thread::sleep(delay);
        }
    }
}
