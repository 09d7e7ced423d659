//! Run settings merged from the config file, the environment and flags
//! (flags win over environment, environment wins over the file).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use hintkit::client::{
    ENV_CHAT_KEY, ENV_CHAT_URL, ENV_EMBED_KEY, ENV_EMBED_URL, ENV_OFFLINE, WIKIMEDIA_PER_ARTICLE,
};
use hintkit::io::registry::{default_cache_dir, ENV_CACHE_DIR, ENV_REGISTRY_URL};

pub const ENV_CONFIG: &str = "HINTKIT_CONFIG";
pub const DEFAULT_CHAT_MODEL: &str = "llama-3.1-8b-instruct";
pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub offline: Option<bool>,
    pub cache_dir: Option<PathBuf>,
    pub registry_url: Option<String>,
    pub chat: EndpointSection,
    pub embed: EndpointSection,
    pub pageviews: PageviewSection,
    pub generation: GenerationSection,
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointSection {
    pub url: Option<String>,
    pub key: Option<String>,
    pub model: Option<String>,
    pub max_in_flight: Option<usize>,
    pub requests_per_second: Option<f64>,
    pub max_attempts: Option<u32>,
    /// Keep responses in an on-disk cache under the cache directory.
    pub cache: bool,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageviewSection {
    pub url: Option<String>,
    pub window_days: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub num_hints: Option<usize>,
    pub temperature: Option<f64>,
    pub max_regeneration_rounds: Option<usize>,
    pub template: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub metrics: Option<Vec<String>>,
    pub freq_table: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Linear readability scorer files by label (`readability/ml/<label>`).
    pub linear_scorers: BTreeMap<String, PathBuf>,
    /// Remote scoring URLs by full method name.
    pub scorers: BTreeMap<String, String>,
    pub entities_url: Option<String>,
    /// Per-method parameters keyed by full method name.
    pub params: BTreeMap<String, toml::Table>,
}

/// Effective settings for one invocation.
#[derive(Debug)]
pub struct RunConfig {
    pub offline: bool,
    pub cache_dir: PathBuf,
    pub registry_url: Option<String>,
    pub chat: EndpointSection,
    pub embed: EndpointSection,
    pub pageviews_url: String,
    pub window_days: Option<u32>,
    pub file: FileConfig,
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

fn default_config_path() -> Option<PathBuf> {
    let base = env("XDG_CONFIG_HOME")
        .map(PathBuf::from)
        .or_else(|| env("HOME").map(|h| Path::new(&h).join(".config")))?;
    Some(base.join("hintkit").join("config.toml"))
}

pub fn load_file(explicit: Option<&Path>) -> Result<FileConfig> {
    let (path, required) = match explicit
        .map(Path::to_path_buf)
        .or_else(|| env(ENV_CONFIG).map(PathBuf::from))
    {
        Some(p) => (p, true),
        None => match default_config_path() {
            Some(p) => (p, false),
            None => return Ok(FileConfig::default()),
        },
    };
    if !path.exists() {
        if required {
            bail!("config file {} does not exist", path.display());
        }
        return Ok(FileConfig::default());
    }
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn truthy(v: &str) -> bool {
    matches!(v.trim(), "1" | "true" | "yes" | "on")
}

impl RunConfig {
    pub fn resolve(config_path: Option<&Path>, offline_flag: bool) -> Result<Self> {
        let file = load_file(config_path)?;
        let offline = offline_flag
            || env(ENV_OFFLINE)
                .map(|v| truthy(&v))
                .unwrap_or(file.offline.unwrap_or(false));
        let cache_dir = env(ENV_CACHE_DIR)
            .map(PathBuf::from)
            .or_else(|| file.cache_dir.clone())
            .unwrap_or_else(default_cache_dir);
        let registry_url = env(ENV_REGISTRY_URL).or_else(|| file.registry_url.clone());
        let mut chat = file.chat.clone();
        chat.url = env(ENV_CHAT_URL).or(chat.url);
        chat.key = env(ENV_CHAT_KEY).or(chat.key);
        let mut embed = file.embed.clone();
        embed.url = env(ENV_EMBED_URL).or(embed.url);
        embed.key = env(ENV_EMBED_KEY).or(embed.key);
        let pageviews_url = file
            .pageviews
            .url
            .clone()
            .unwrap_or_else(|| WIKIMEDIA_PER_ARTICLE.to_string());
        let window_days = file.pageviews.window_days;
        Ok(RunConfig {
            offline,
            cache_dir,
            registry_url,
            chat,
            embed,
            pageviews_url,
            window_days,
            file,
        })
    }
}
