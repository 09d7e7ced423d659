//! Which methods to run, on which text units, with which parameters.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::MetricError;

/// The text unit a method scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Question,
    Answer,
    Hint,
}

impl FromStr for Target {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "question" => Ok(Target::Question),
            "answer" => Ok(Target::Answer),
            "hint" => Ok(Target::Hint),
            other => Err(MetricError::InvalidParameter(format!(
                "unknown target `{other}`"
            ))),
        }
    }
}

/// How a method's variant segment is constrained.
enum Variants {
    /// The method name stands alone (`relevance/llm`).
    None,
    /// One of a fixed list; the first is the default.
    Fixed(&'static [&'static str]),
    /// A free-form label naming a backend (model or scorer); defaults to `default`.
    Label,
}

struct MethodInfo {
    metric: &'static str,
    method: &'static str,
    variants: Variants,
    network: bool,
    /// Units the method may score besides hints.
    other_targets: &'static [Target],
}

const READ_TARGETS: &[Target] = &[Target::Question, Target::Answer];

const METHODS: &[MethodInfo] = &[
    MethodInfo {
        metric: "relevance",
        method: "rouge",
        variants: Variants::Fixed(&["rougeL", "rouge1", "rouge2"]),
        network: false,
        other_targets: &[],
    },
    MethodInfo {
        metric: "relevance",
        method: "noncontextual",
        variants: Variants::Label,
        network: false,
        other_targets: &[],
    },
    MethodInfo {
        metric: "relevance",
        method: "contextual",
        variants: Variants::Label,
        network: true,
        other_targets: &[],
    },
    MethodInfo {
        metric: "relevance",
        method: "llm",
        variants: Variants::None,
        network: true,
        other_targets: &[],
    },
    MethodInfo {
        metric: "readability",
        method: "traditional",
        variants: Variants::Fixed(&["flesch", "gunning_fog", "coleman_liau", "smog", "ari"]),
        network: false,
        other_targets: READ_TARGETS,
    },
    MethodInfo {
        metric: "readability",
        method: "ml",
        variants: Variants::Label,
        network: false,
        other_targets: READ_TARGETS,
    },
    MethodInfo {
        metric: "readability",
        method: "nn",
        variants: Variants::Label,
        network: true,
        other_targets: READ_TARGETS,
    },
    MethodInfo {
        metric: "readability",
        method: "llm",
        variants: Variants::None,
        network: true,
        other_targets: READ_TARGETS,
    },
    MethodInfo {
        metric: "convergence",
        method: "llm",
        variants: Variants::None,
        network: true,
        other_targets: &[],
    },
    MethodInfo {
        metric: "convergence",
        method: "specificity",
        variants: Variants::Label,
        network: true,
        other_targets: &[],
    },
    MethodInfo {
        metric: "convergence",
        method: "nn",
        variants: Variants::Label,
        network: true,
        other_targets: &[],
    },
    MethodInfo {
        metric: "familiarity",
        method: "wordfreq",
        variants: Variants::Fixed(&["nostop", "withstop"]),
        network: false,
        other_targets: READ_TARGETS,
    },
    MethodInfo {
        metric: "familiarity",
        method: "wikipedia",
        variants: Variants::None,
        network: true,
        other_targets: READ_TARGETS,
    },
    MethodInfo {
        metric: "answerleakage",
        method: "lexical",
        variants: Variants::Fixed(&["nostop", "withstop"]),
        network: false,
        other_targets: &[],
    },
    MethodInfo {
        metric: "answerleakage",
        method: "contextual",
        variants: Variants::Label,
        network: true,
        other_targets: &[],
    },
];

fn lookup(metric: &str, method: &str) -> Option<&'static MethodInfo> {
    METHODS
        .iter()
        .find(|m| m.metric == metric && m.method == method)
}

/// One enabled method: `metric/method[/variant]`, its parameters and the
/// units it scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub metric: String,
    pub method: String,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default = "default_targets")]
    pub targets: Vec<Target>,
}

fn default_targets() -> Vec<Target> {
    vec![Target::Hint]
}

impl MethodSpec {
    /// Parses `metric/method[/variant][@target+target]`. A missing variant
    /// takes the method's default.
    pub fn parse(s: &str) -> Result<Self, MetricError> {
        let s = s.trim();
        let (path, targets) = match s.split_once('@') {
            Some((p, t)) => (
                p,
                t.split('+')
                    .map(str::parse)
                    .collect::<Result<Vec<Target>, _>>()?,
            ),
            None => (s, default_targets()),
        };
        let parts: Vec<&str> = path.split('/').collect();
        let unknown = || MetricError::UnknownMethod(path.to_string());
        if parts.len() < 2 || parts.len() > 3 || parts.iter().any(|p| p.is_empty()) {
            return Err(unknown());
        }
        let info = lookup(parts[0], parts[1]).ok_or_else(unknown)?;
        let variant = match (&info.variants, parts.get(2)) {
            (Variants::None, None) => None,
            (Variants::None, Some(_)) => return Err(unknown()),
            (Variants::Fixed(allowed), Some(v)) if allowed.contains(v) => Some(v.to_string()),
            (Variants::Fixed(_), Some(_)) => return Err(unknown()),
            (Variants::Fixed(allowed), None) => Some(allowed[0].to_string()),
            (Variants::Label, v) => Some(v.unwrap_or(&"default").to_string()),
        };
        let spec = MethodSpec {
            metric: info.metric.to_string(),
            method: info.method.to_string(),
            variant,
            params: BTreeMap::new(),
            targets,
        };
        spec.check_targets()?;
        Ok(spec)
    }

    fn info(&self) -> Result<&'static MethodInfo, MetricError> {
        lookup(&self.metric, &self.method).ok_or_else(|| MetricError::UnknownMethod(self.name()))
    }

    fn check_targets(&self) -> Result<(), MetricError> {
        let info = self.info()?;
        if self.targets.is_empty() {
            return Err(MetricError::InvalidParameter(format!(
                "{}: no targets",
                self.name()
            )));
        }
        for t in &self.targets {
            if *t != Target::Hint && !info.other_targets.contains(t) {
                return Err(MetricError::InvalidParameter(format!(
                    "{} cannot score {t:?} units",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    /// The metric name results are stored under.
    pub fn name(&self) -> String {
        match &self.variant {
            Some(v) => format!("{}/{}/{v}", self.metric, self.method),
            None => format!("{}/{}", self.metric, self.method),
        }
    }

    pub fn requires_network(&self) -> bool {
        self.info().map(|i| i.network).unwrap_or(true)
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn param_usize(&self, key: &str, default: usize) -> Result<usize, MetricError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|n| n as usize).ok_or_else(|| {
                MetricError::InvalidParameter(format!(
                    "{}: `{key}` must be a non-negative integer",
                    self.name()
                ))
            }),
        }
    }

    pub fn param_str(&self, key: &str) -> Result<Option<&str>, MetricError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(MetricError::InvalidParameter(format!(
                "{}: `{key}` must be a string",
                self.name()
            ))),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// The method suite for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub methods: Vec<MethodSpec>,
    /// Recompute results that are already present.
    #[serde(default)]
    pub overwrite: bool,
    /// Worker threads; 0 picks one per available core.
    #[serde(default)]
    pub workers: usize,
}

impl MetricConfig {
    pub fn new(methods: Vec<MethodSpec>) -> Self {
        MetricConfig {
            methods,
            overwrite: false,
            workers: 0,
        }
    }

    /// Parses a comma-separated list of method descriptors.
    pub fn parse_list(s: &str) -> Result<Self, MetricError> {
        let methods = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(MethodSpec::parse)
            .collect::<Result<Vec<_>, _>>()?;
        let config = MetricConfig::new(methods);
        config.validate()?;
        Ok(config)
    }

    /// The four deterministic methods that need nothing beyond a frequency
    /// table: ROUGE-L, Flesch, word-frequency familiarity and lexical leakage.
    pub fn offline_default() -> Self {
        MetricConfig::parse_list(
            "relevance/rouge/rougeL,readability/traditional/flesch,\
             familiarity/wordfreq/nostop,answerleakage/lexical/nostop",
        )
        .expect("built-in method list parses")
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let mut seen = HashSet::new();
        for m in &self.methods {
            m.check_targets()?;
            if !seen.insert(m.name()) {
                return Err(MetricError::DuplicateMethod(m.name()));
            }
        }
        Ok(())
    }
}
