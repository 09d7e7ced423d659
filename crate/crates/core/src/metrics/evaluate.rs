//! Runs a configured method suite over a dataset.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{MethodSpec, MetricConfig, Target};
use super::convergence::{convergence_llm, convergence_scored};
use super::familiarity::{familiarity_wikipedia, familiarity_wordfreq, FrequencyTable};
use super::leakage::{answerleakage_contextual, answerleakage_lexical};
use super::readability::{
    readability_linear, readability_llm, readability_traditional, Banding, Formula, LinearScorer,
};
use super::relevance::{
    relevance_contextual, relevance_llm, relevance_rouge, relevance_static_embedding, RougeVariant,
};
use super::{MetricError, MetricOutput};
use crate::client::{
    ChatClient, EmbedClient, PageviewClient, ScoringBackend, VectorTable, DEFAULT_WINDOW_DAYS,
};
use crate::enrich::{EntityProvider, HeuristicEntities};
use crate::model::{attach_metric, Dataset, Instance, MetricResult, Scored};

/// Everything methods may call out to. Absent entries make the methods
/// that need them unavailable.
#[derive(Clone, Default)]
pub struct Backends {
    pub chat: Option<Arc<dyn ChatClient>>,
    /// Chat model name; falls back to the client's default.
    pub chat_model: Option<String>,
    pub embed: Option<Arc<dyn EmbedClient>>,
    pub pageviews: Option<Arc<dyn PageviewClient>>,
    pub vectors: Option<Arc<VectorTable>>,
    pub frequency: Option<Arc<FrequencyTable>>,
    /// Linear readability scorers by variant label.
    pub linear: BTreeMap<String, Arc<LinearScorer>>,
    /// Remote scorers by full method name, e.g. `convergence/specificity/default`.
    pub scorers: BTreeMap<String, Arc<dyn ScoringBackend>>,
    /// Entity source for familiarity when a unit has no entities yet.
    pub entities: Option<Arc<dyn EntityProvider>>,
    pub banding: Banding,
    /// Refuse every method that needs the network.
    pub offline: bool,
}

/// A text unit inside one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Unit {
    Question,
    Answer(usize),
    Hint(usize),
}

impl Unit {
    fn get(self, instance: &Instance) -> &dyn Scored {
        match self {
            Unit::Question => &instance.question,
            Unit::Answer(i) => &instance.answers[i],
            Unit::Hint(i) => &instance.hints[i],
        }
    }

    fn get_mut(self, instance: &mut Instance) -> &mut dyn Scored {
        match self {
            Unit::Question => &mut instance.question,
            Unit::Answer(i) => &mut instance.answers[i],
            Unit::Hint(i) => &mut instance.hints[i],
        }
    }
}

/// A scoring method ready to run. Custom metrics implement this trait and
/// run through [`evaluate_dataset`] like the built-in ones.
pub trait Evaluator: Send + Sync {
    /// Name results are stored under.
    fn name(&self) -> &str;
    fn requires_network(&self) -> bool;
    fn targets(&self) -> &[Target];
    /// Scores `units` of `instance`, one output per unit in order.
    fn evaluate(
        &self,
        instance: &Instance,
        units: &[Unit],
    ) -> Result<Vec<MetricOutput>, MetricError>;
}

enum Kind {
    Rouge(RougeVariant),
    Static(Arc<VectorTable>),
    Contextual(Arc<dyn EmbedClient>),
    RelevanceLlm {
        chat: Arc<dyn ChatClient>,
        embed: Arc<dyn EmbedClient>,
        m: usize,
    },
    Traditional(Formula, Banding),
    Linear(Arc<LinearScorer>),
    ReadabilityScorer(Arc<dyn ScoringBackend>),
    ReadabilityLlm(Arc<dyn ChatClient>),
    ConvergenceLlm {
        chat: Arc<dyn ChatClient>,
        k: usize,
    },
    ConvergenceScorer(Arc<dyn ScoringBackend>),
    WordFreq {
        table: Arc<FrequencyTable>,
        stopwords: bool,
    },
    Wikipedia {
        pageviews: Arc<dyn PageviewClient>,
        entities: Arc<dyn EntityProvider>,
        window: u32,
    },
    LexicalLeak {
        stopwords: bool,
    },
    ContextualLeak(Arc<dyn EmbedClient>),
}

/// A built-in method bound to its backends.
pub struct MethodEvaluator {
    name: String,
    network: bool,
    targets: Vec<Target>,
    model: String,
    kind: Kind,
}

impl MethodEvaluator {
    /// Resolves `spec` against `backends`; fails with `BackendUnavailable`
    /// when a needed backend is missing or the network is off.
    pub fn build(spec: &MethodSpec, backends: &Backends) -> Result<Self, MetricError> {
        let name = spec.name();
        let network = spec.requires_network();
        let unavailable = || MetricError::BackendUnavailable(name.clone());
        if network && backends.offline {
            return Err(unavailable());
        }
        let chat = || backends.chat.clone().ok_or_else(unavailable);
        let embed = || backends.embed.clone().ok_or_else(unavailable);
        let scorer = || backends.scorers.get(&name).cloned().ok_or_else(unavailable);
        let variant = spec.variant.as_deref().unwrap_or("");
        let kind = match (spec.metric.as_str(), spec.method.as_str()) {
            ("relevance", "rouge") => Kind::Rouge(
                RougeVariant::parse(variant)
                    .ok_or_else(|| MetricError::UnknownMethod(name.clone()))?,
            ),
            ("relevance", "noncontextual") => {
                Kind::Static(backends.vectors.clone().ok_or_else(unavailable)?)
            }
            ("relevance", "contextual") => Kind::Contextual(embed()?),
            ("relevance", "llm") => Kind::RelevanceLlm {
                chat: chat()?,
                embed: embed()?,
                m: spec.param_usize("m", 3)?,
            },
            ("readability", "traditional") => Kind::Traditional(
                Formula::parse(variant).ok_or_else(|| MetricError::UnknownMethod(name.clone()))?,
                backends.banding,
            ),
            ("readability", "ml") => Kind::Linear(
                backends
                    .linear
                    .get(variant)
                    .cloned()
                    .ok_or_else(unavailable)?,
            ),
            ("readability", "nn") => Kind::ReadabilityScorer(scorer()?),
            ("readability", "llm") => Kind::ReadabilityLlm(chat()?),
            ("convergence", "llm") => Kind::ConvergenceLlm {
                chat: chat()?,
                k: spec.param_usize("k", 10)?,
            },
            ("convergence", "specificity" | "nn") => Kind::ConvergenceScorer(scorer()?),
            ("familiarity", "wordfreq") => Kind::WordFreq {
                table: backends.frequency.clone().ok_or_else(unavailable)?,
                stopwords: variant == "withstop",
            },
            ("familiarity", "wikipedia") => Kind::Wikipedia {
                pageviews: backends.pageviews.clone().ok_or_else(unavailable)?,
                entities: backends
                    .entities
                    .clone()
                    .unwrap_or_else(|| Arc::new(HeuristicEntities)),
                window: spec.param_usize("window_days", DEFAULT_WINDOW_DAYS as usize)? as u32,
            },
            ("answerleakage", "lexical") => Kind::LexicalLeak {
                stopwords: variant == "withstop",
            },
            ("answerleakage", "contextual") => Kind::ContextualLeak(embed()?),
            _ => return Err(MetricError::UnknownMethod(name)),
        };
        let model = match spec.param_str("model")? {
            Some(m) => m.to_string(),
            None => backends
                .chat_model
                .clone()
                .or_else(|| {
                    backends
                        .chat
                        .as_ref()
                        .map(|c| c.default_model().to_string())
                })
                .unwrap_or_else(|| "default".into()),
        };
        Ok(MethodEvaluator {
            name,
            network,
            targets: spec.targets.clone(),
            model,
            kind,
        })
    }

    fn score_one(&self, instance: &Instance, unit: Unit) -> Result<MetricOutput, MetricError> {
        let text = unit.get(instance).text();
        let question = instance.question.text.as_str();
        let answers = instance.answer_texts();
        Ok(match &self.kind {
            Kind::Rouge(v) => MetricOutput::new(relevance_rouge(text, question, *v)),
            Kind::Static(table) => relevance_static_embedding(text, question, table),
            Kind::Contextual(embed) => relevance_contextual(text, question, embed.as_ref())?,
            Kind::RelevanceLlm { chat, embed, m } => relevance_llm(
                text,
                question,
                chat.as_ref(),
                embed.as_ref(),
                *m,
                &self.model,
            )?,
            Kind::Traditional(formula, banding) => {
                let s = readability_traditional(text, *formula, banding)?;
                MetricOutput::flagged(f64::from(s.level), json!({ "raw": s.raw }))
            }
            Kind::Linear(scorer) => readability_linear(text, scorer)?,
            Kind::ReadabilityLlm(chat) => MetricOutput::new(f64::from(readability_llm(
                text,
                chat.as_ref(),
                &self.model,
            )?)),
            Kind::WordFreq { table, stopwords } => familiarity_wordfreq(text, table, *stopwords),
            Kind::Wikipedia {
                pageviews,
                entities,
                window,
            } => {
                let found;
                let list = match unit.get(instance).entities() {
                    [] => {
                        found = entities.extract(text)?;
                        &found[..]
                    }
                    some => some,
                };
                let names: Vec<&str> = list.iter().map(|e| e.text.as_str()).collect();
                familiarity_wikipedia(&names, pageviews.as_ref(), *window)?
            }
            Kind::LexicalLeak { stopwords } => answerleakage_lexical(text, &answers, *stopwords),
            Kind::ContextualLeak(embed) => {
                answerleakage_contextual(text, &answers, embed.as_ref())?
            }
            Kind::ReadabilityScorer(_)
            | Kind::ConvergenceLlm { .. }
            | Kind::ConvergenceScorer(_) => {
                unreachable!("batched kinds are scored in evaluate")
            }
        })
    }
}

impl Evaluator for MethodEvaluator {
    fn name(&self) -> &str {
        &self.name
    }

    fn requires_network(&self) -> bool {
        self.network
    }

    fn targets(&self) -> &[Target] {
        &self.targets
    }

    fn evaluate(
        &self,
        instance: &Instance,
        units: &[Unit],
    ) -> Result<Vec<MetricOutput>, MetricError> {
        let texts = || {
            units
                .iter()
                .map(|u| u.get(instance).text().to_string())
                .collect::<Vec<_>>()
        };
        match &self.kind {
            Kind::ConvergenceLlm { chat, k } => {
                let hints: Vec<&str> = units.iter().map(|u| u.get(instance).text()).collect();
                let report = convergence_llm(
                    &instance.question.text,
                    &instance.answer_texts(),
                    &hints,
                    chat.as_ref(),
                    *k,
                    &self.model,
                )?;
                Ok(report
                    .per_hint
                    .iter()
                    .map(|h| {
                        let eliminated: Vec<&str> = h
                            .eliminated
                            .iter()
                            .map(|&i| report.candidates[i].text.as_str())
                            .collect();
                        let mut detail =
                            json!({ "eliminated": eliminated, "survived_gold": h.survived_gold });
                        if h.no_incorrect {
                            detail["no_incorrect"] = json!(true);
                        }
                        MetricOutput::flagged(h.score, detail)
                    })
                    .collect())
            }
            Kind::ConvergenceScorer(scorer) => Ok(convergence_scored(&texts(), scorer.as_ref())?
                .into_iter()
                .map(MetricOutput::new)
                .collect()),
            Kind::ReadabilityScorer(scorer) => {
                // Scores are read as a continuous level and rounded into {0, 1, 2}.
                let scores = convergence_scored(&texts(), &Scaled(scorer.as_ref()))?;
                Ok(scores
                    .into_iter()
                    .map(|s| {
                        let raw = s * 2.0;
                        MetricOutput::flagged(raw.round(), json!({ "raw": raw }))
                    })
                    .collect())
            }
            _ => units.iter().map(|&u| self.score_one(instance, u)).collect(),
        }
    }
}

/// Maps readability scorer output from `[0, 2]` onto `[0, 1]` so the
/// shared clamp-and-check path applies.
struct Scaled<'a>(&'a dyn ScoringBackend);

impl ScoringBackend for Scaled<'_> {
    fn score(&self, texts: &[String]) -> Result<Vec<f64>, crate::client::ClientError> {
        Ok(self.0.score(texts)?.into_iter().map(|s| s / 2.0).collect())
    }
}

/// Receives `(done, total)` instance counts; `done` never decreases.
pub trait ProgressSink: Sync {
    fn progress(&self, done: usize, total: usize);
}

impl ProgressSink for () {
    fn progress(&self, _done: usize, _total: usize) {}
}

/// Adapts a closure into a [`ProgressSink`].
pub struct FnProgress<F>(pub F);

impl<F: Fn(usize, usize) + Sync> ProgressSink for FnProgress<F> {
    fn progress(&self, done: usize, total: usize) {
        (self.0)(done, total)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MethodStats {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub methods: BTreeMap<String, MethodStats>,
    /// Mean of each evaluated method per subset, over every unit carrying it.
    pub means: BTreeMap<String, BTreeMap<String, f64>>,
}

impl EvaluationSummary {
    /// True when every method failed at least once and never produced or
    /// kept a value.
    pub fn all_failed(&self) -> bool {
        !self.methods.is_empty()
            && self
                .methods
                .values()
                .all(|m| m.failed > 0 && m.computed == 0 && m.skipped == 0)
    }
}

fn units_for(instance: &Instance, targets: &[Target]) -> Vec<Unit> {
    let mut units = Vec::new();
    for t in targets {
        match t {
            Target::Question => units.push(Unit::Question),
            Target::Answer => units.extend((0..instance.answers.len()).map(Unit::Answer)),
            Target::Hint => units.extend((0..instance.hints.len()).map(Unit::Hint)),
        }
    }
    units.sort();
    units.dedup();
    units
}

/// Scored units, or how many units failed and why.
type MethodOutcome = Result<Vec<(Unit, MetricOutput)>, (usize, MetricError)>;

struct InstanceOutcome {
    /// Per evaluator: skipped count and the outcome.
    per_method: Vec<(usize, MethodOutcome)>,
}

fn run_instance(
    instance: &Instance,
    evaluators: &[Box<dyn Evaluator>],
    overwrite: bool,
) -> InstanceOutcome {
    let per_method = evaluators
        .iter()
        .map(|ev| {
            let all = units_for(instance, ev.targets());
            let pending: Vec<Unit> = all
                .iter()
                .copied()
                .filter(|u| overwrite || !u.get(instance).metrics().contains_key(ev.name()))
                .collect();
            let skipped = all.len() - pending.len();
            if pending.is_empty() {
                return (skipped, Ok(Vec::new()));
            }
            let result = match ev.evaluate(instance, &pending) {
                Ok(outputs) if outputs.len() == pending.len() => {
                    Ok(pending.iter().copied().zip(outputs).collect())
                }
                Ok(outputs) => Err((
                    pending.len(),
                    MetricError::InvalidParameter(format!(
                        "{} returned {} scores for {} units",
                        ev.name(),
                        outputs.len(),
                        pending.len()
                    )),
                )),
                Err(e) => Err((pending.len(), e)),
            };
            (skipped, result)
        })
        .collect();
    InstanceOutcome { per_method }
}

/// Builds one evaluator per configured method. Fails before any work if a
/// method cannot run with the given backends.
pub fn build_evaluators(
    config: &MetricConfig,
    backends: &Backends,
) -> Result<Vec<Box<dyn Evaluator>>, MetricError> {
    config.validate()?;
    config
        .methods
        .iter()
        .map(|spec| {
            MethodEvaluator::build(spec, backends).map(|e| Box::new(e) as Box<dyn Evaluator>)
        })
        .collect()
}

/// Scores every configured unit of every instance and attaches the results.
///
/// Instances are scored in parallel on a bounded pool; results are attached
/// afterwards in dataset order, so output does not depend on scheduling.
/// Units already carrying a method's result are skipped unless
/// `config.overwrite` is set. A failing method is recorded in the summary
/// and does not stop the others.
pub fn evaluate_dataset(
    dataset: &mut Dataset,
    config: &MetricConfig,
    backends: &Backends,
    progress: &dyn ProgressSink,
) -> Result<EvaluationSummary, MetricError> {
    let evaluators = build_evaluators(config, backends)?;
    evaluate_with(
        dataset,
        &evaluators,
        config.overwrite,
        config.workers,
        progress,
    )
}

/// [`evaluate_dataset`] over caller-supplied evaluators.
pub fn evaluate_with(
    dataset: &mut Dataset,
    evaluators: &[Box<dyn Evaluator>],
    overwrite: bool,
    workers: usize,
    progress: &dyn ProgressSink,
) -> Result<EvaluationSummary, MetricError> {
    let keys: Vec<(String, String)> = dataset
        .subsets
        .iter()
        .flat_map(|(s, sub)| sub.instances.keys().map(move |q| (s.clone(), q.clone())))
        .collect();
    let total = keys.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MetricError::InvalidParameter(format!("worker pool: {e}")))?;
    let done = Mutex::new(0usize);
    let snapshot: &Dataset = dataset;
    let outcomes: Vec<InstanceOutcome> = pool.install(|| {
        keys.par_iter()
            .map(|(s, q)| {
                let outcome =
                    run_instance(&snapshot.subsets[s].instances[q], evaluators, overwrite);
                let mut d = done.lock().unwrap();
                *d += 1;
                progress.progress(*d, total);
                outcome
            })
            .collect()
    });

    let mut summary = EvaluationSummary::default();
    for ev in evaluators {
        summary.methods.entry(ev.name().to_string()).or_default();
    }
    for ((s, q), outcome) in keys.iter().zip(outcomes) {
        let instance = dataset
            .subsets
            .get_mut(s)
            .and_then(|sub| sub.instances.get_mut(q))
            .expect("instance keys are stable");
        for (ev, (skipped, result)) in evaluators.iter().zip(outcome.per_method) {
            let stats = summary
                .methods
                .get_mut(ev.name())
                .expect("registered above");
            stats.skipped += skipped;
            match result {
                Ok(scored) => {
                    for (unit, out) in scored {
                        let mut r = MetricResult::new(ev.name(), out.value);
                        r.detail = out.detail;
                        match attach_metric(unit.get_mut(instance), r) {
                            Ok(()) => stats.computed += 1,
                            Err(e) => {
                                stats.failed += 1;
                                stats
                                    .first_error
                                    .get_or_insert_with(|| format!("{s}/{q}: {e}"));
                            }
                        }
                    }
                }
                Err((n, e)) => {
                    log::warn!("{} failed on {s}/{q}: {e}", ev.name());
                    stats.failed += n;
                    stats
                        .first_error
                        .get_or_insert_with(|| format!("{s}/{q}: {e}"));
                }
            }
        }
    }
    for stats in summary.methods.values() {
        summary.computed += stats.computed;
        summary.skipped += stats.skipped;
        summary.failed += stats.failed;
    }
    let names: Vec<&str> = evaluators.iter().map(|e| e.name()).collect();
    summary.means = subset_means(dataset, &names);
    Ok(summary)
}

/// Mean of each named metric per subset over questions, answers and hints.
fn subset_means(dataset: &Dataset, names: &[&str]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (sname, subset) in &dataset.subsets {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for inst in subset.instances.values() {
            let units = std::iter::once(&inst.question.metrics)
                .chain(inst.answers.iter().map(|a| &a.metrics))
                .chain(inst.hints.iter().map(|h| &h.metrics));
            for metrics in units {
                for name in names {
                    if let Some(m) = metrics.get(*name) {
                        let e = acc.entry(name.to_string()).or_default();
                        e.0 += m.value;
                        e.1 += 1;
                    }
                }
            }
        }
        out.insert(
            sname.clone(),
            acc.into_iter()
                .map(|(k, (sum, n))| (k, sum / n as f64))
                .collect(),
        );
    }
    out
}
