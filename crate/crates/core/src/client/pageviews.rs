use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{Days, NaiveDate, Utc};
use serde_json::Value;

use super::http::{Endpoint, HttpRequest};
use super::{ClientError, PageviewClient};

pub const DEFAULT_WINDOW_DAYS: u32 = 30;

pub const WIKIMEDIA_PER_ARTICLE: &str =
    "https://wikimedia.org/api/rest_v1/metrics/pageviews/per-article";

/// Views summed over a window. `found` is false when the article does not
/// exist, in which case `views` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageviewCount {
    pub views: u64,
    pub found: bool,
}

/// Wikimedia per-article daily pageviews, cached per `(title, window)`.
pub struct WikimediaPageviews {
    endpoint: Endpoint,
    project: String,
    end_date: Option<NaiveDate>,
    cache: Mutex<HashMap<(String, u32), PageviewCount>>,
}

impl WikimediaPageviews {
    pub fn new(endpoint: Endpoint) -> Self {
        WikimediaPageviews {
            endpoint,
            project: "en.wikipedia".into(),
            end_date: None,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_project(mut self, project: impl Into<String>) -> Self {
        self.project = project.into();
        self
    }

    /// Pins the last day of every window (defaults to yesterday, UTC).
    pub fn with_end_date(mut self, end: NaiveDate) -> Self {
        self.end_date = Some(end);
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn request_url(&self, title: &str, window_days: u32) -> Result<String, ClientError> {
        let end = self.end_date.unwrap_or_else(|| {
            Utc::now()
                .date_naive()
                .checked_sub_days(Days::new(1))
                .expect("date in range")
        });
        let start = end
            .checked_sub_days(Days::new(u64::from(window_days.max(1) - 1)))
            .ok_or_else(|| ClientError::InvalidRequest("window too large".into()))?;
        let mut url = url::Url::parse(&self.endpoint.base_url)
            .map_err(|e| ClientError::InvalidRequest(format!("bad pageviews URL: {e}")))?;
        url.path_segments_mut()
            .map_err(|_| ClientError::InvalidRequest("pageviews URL cannot be a base".into()))?
            .pop_if_empty()
            .extend([
                self.project.as_str(),
                "all-access",
                "user",
                &article_title(title),
                "daily",
                &start.format("%Y%m%d").to_string(),
                &end.format("%Y%m%d").to_string(),
            ]);
        Ok(url.into())
    }
}

/// Wikipedia article titles use underscores for spaces.
pub fn article_title(title: &str) -> String {
    title.split_whitespace().collect::<Vec<_>>().join("_")
}

impl PageviewClient for WikimediaPageviews {
    fn pageviews(&self, title: &str, window_days: u32) -> Result<PageviewCount, ClientError> {
        if title.trim().is_empty() {
            return Err(ClientError::InvalidRequest("empty title".into()));
        }
        let key = (article_title(title), window_days);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let url = self.request_url(title, window_days)?;
        let count = match self.endpoint.send(&HttpRequest::get(url)) {
            Ok(resp) => PageviewCount {
                views: sum_views(&resp.json()?)?,
                found: true,
            },
            Err(ClientError::Http { status: 404, .. }) => PageviewCount {
                views: 0,
                found: false,
            },
            Err(e) => return Err(e),
        };
        self.cache.lock().unwrap().insert(key, count);
        Ok(count)
    }
}

fn sum_views(body: &Value) -> Result<u64, ClientError> {
    let items = body
        .get("items")
        .and_then(Value::as_array)
        .ok_or_else(|| ClientError::Decode("missing `items`".into()))?;
    items
        .iter()
        .map(|item| {
            item.get("views")
                .and_then(Value::as_u64)
                .ok_or_else(|| ClientError::Decode("item without `views`".into()))
        })
        .sum()
}
