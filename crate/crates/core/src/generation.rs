//! Hint generation through a chat model, with or without the gold answer.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ChatClient, ChatMessage, ChatRequest, ClientError};
use crate::model::{Dataset, Hint, Instance};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("instance `{0}` has no answer")]
    MissingAnswer(String),
    #[error("could not produce enough hints for `{0}`")]
    GenerationFailed(String),
    #[error("no list items in completion: {0:?}")]
    UnparseableCompletion(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    AnswerAware,
    AnswerAgnostic,
}

impl Mode {
    pub fn suffix(self) -> &'static str {
        match self {
            Mode::AnswerAware => "answer-aware",
            Mode::AnswerAgnostic => "answer-agnostic",
        }
    }

    pub fn default_template(self) -> &'static str {
        match self {
            Mode::AnswerAware => "answer-aware-v1",
            Mode::AnswerAgnostic => "answer-agnostic-v1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub num_hints: usize,
    pub model: String,
    pub temperature: f64,
    pub prompt_template_id: String,
    pub max_regeneration_rounds: usize,
    /// Drop hints containing an answer verbatim. Only meaningful when the
    /// answer is known; on by default for answer-aware generation.
    pub leak_filter: bool,
    pub seed: Option<u64>,
    /// Worker threads; 0 picks one per available core.
    pub workers: usize,
}

impl GenerationConfig {
    pub fn new(model: impl Into<String>, mode: Mode) -> Self {
        GenerationConfig {
            num_hints: 5,
            model: model.into(),
            temperature: 0.7,
            prompt_template_id: mode.default_template().into(),
            max_regeneration_rounds: 2,
            leak_filter: mode == Mode::AnswerAware,
            seed: None,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.num_hints == 0 {
            return Err(GenerationError::InvalidConfig(
                "num_hints must be at least 1".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GenerationError::InvalidConfig(
                "temperature must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A system/user prompt pair with `{question}`, `{answer}` and `{n}`
/// placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub system: String,
    pub user: String,
}

const AWARE_SYSTEM: &str = "You write hints for quiz questions. Produce {n} hints that guide \
the reader toward the answer without revealing it. Never state the answer or any part of it. \
Reply with a numbered list, one hint per line, and nothing else.";
const AWARE_USER: &str = "Question: {question}\nAnswer: {answer}\nWrite {n} hints.";
const AGNOSTIC_SYSTEM: &str = "You write hints for quiz questions. Produce {n} hints that help \
the reader work out the answer without stating it. Reply with a numbered list, one hint per \
line, and nothing else.";
const AGNOSTIC_USER: &str = "Question: {question}\nWrite {n} hints.";

impl PromptTemplate {
    pub fn builtin(id: &str) -> Result<Self, GenerationError> {
        let (system, user) = match id {
            "answer-aware-v1" => (AWARE_SYSTEM, AWARE_USER),
            "answer-agnostic-v1" => (AGNOSTIC_SYSTEM, AGNOSTIC_USER),
            other => return Err(GenerationError::UnknownTemplate(other.into())),
        };
        Ok(PromptTemplate {
            id: id.into(),
            system: system.into(),
            user: user.into(),
        })
    }

    /// Loads a template file. A line holding only `---` separates the system
    /// prompt from the user prompt; without it the whole file is the user
    /// prompt and the system prompt comes from `fallback`.
    pub fn from_file(path: &Path, fallback: &PromptTemplate) -> Result<Self, GenerationError> {
        let text = std::fs::read_to_string(path).map_err(|source| GenerationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let lines: Vec<&str> = text.lines().collect();
        let (system, user) = match lines.iter().position(|l| l.trim() == "---") {
            Some(i) => (lines[..i].join("\n"), lines[i + 1..].join("\n")),
            None => (fallback.system.clone(), text.trim_end().to_string()),
        };
        Ok(PromptTemplate {
            id: path.display().to_string(),
            system: system.trim().to_string(),
            user: user.trim().to_string(),
        })
    }

    pub fn render(&self, question: &str, answers: &[&str], n: usize) -> Vec<ChatMessage> {
        let fill = |t: &str| {
            t.replace("{question}", question)
                .replace("{answer}", &answers.join(" / "))
                .replace("{n}", &n.to_string())
        };
        vec![
            ChatMessage::system(fill(&self.system)),
            ChatMessage::user(fill(&self.user)),
        ]
    }
}

fn strip_marker(line: &str) -> Option<&str> {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix(['-', '*']) {
        return (rest.is_empty() || rest.starts_with(char::is_whitespace)).then_some(rest);
    }
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = line[digits..].strip_prefix(['.', ')'])?;
    (rest.is_empty() || rest.starts_with(char::is_whitespace)).then_some(rest)
}

/// List items (`1.`, `1)`, `-`, `*`) of a completion, markers stripped,
/// empties dropped, at most `expected` of them.
pub fn parse_list_items(text: &str, expected: usize) -> Vec<String> {
    text.lines()
        .filter_map(strip_marker)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .take(expected)
        .map(str::to_string)
        .collect()
}

/// Like [`parse_list_items`], but a completion without any item is an error.
pub fn parse_hint_list(text: &str, expected: usize) -> Result<Vec<String>, GenerationError> {
    let items = parse_list_items(text, expected);
    if items.is_empty() {
        return Err(GenerationError::UnparseableCompletion(text.to_string()));
    }
    Ok(items)
}

/// True when `hint` contains any answer verbatim, ignoring case.
pub fn leaks_answer(hint: &str, answers: &[&str]) -> bool {
    let hint = hint.to_lowercase();
    answers
        .iter()
        .map(|a| a.trim().to_lowercase())
        .any(|a| !a.is_empty() && hint.contains(&a))
}

/// Produces hint texts for one question. Custom generators implement this
/// and plug into [`generate_with`].
pub trait HintGenerator: Sync {
    /// Value stored in [`Hint::source`].
    fn source(&self) -> String;
    fn needs_answer(&self) -> bool;
    fn generate(
        &self,
        q_id: &str,
        question: &str,
        answers: &[&str],
    ) -> Result<Vec<String>, GenerationError>;
}

/// Chat-backed generator following the configured prompt template.
pub struct ChatHintGenerator<'a> {
    chat: &'a dyn ChatClient,
    cfg: GenerationConfig,
    mode: Mode,
    template: PromptTemplate,
}

impl<'a> ChatHintGenerator<'a> {
    pub fn new(
        chat: &'a dyn ChatClient,
        cfg: GenerationConfig,
        mode: Mode,
    ) -> Result<Self, GenerationError> {
        cfg.validate()?;
        let template = PromptTemplate::builtin(&cfg.prompt_template_id)?;
        Ok(ChatHintGenerator {
            chat,
            cfg,
            mode,
            template,
        })
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }
}

impl HintGenerator for ChatHintGenerator<'_> {
    fn source(&self) -> String {
        format!("model:{}/{}", self.cfg.model, self.mode.suffix())
    }

    fn needs_answer(&self) -> bool {
        self.mode == Mode::AnswerAware
    }

    /// Asks for the missing number of hints until there are enough or the
    /// regeneration rounds run out. Leaking and duplicate hints are dropped.
    fn generate(
        &self,
        q_id: &str,
        question: &str,
        answers: &[&str],
    ) -> Result<Vec<String>, GenerationError> {
        let n = self.cfg.num_hints;
        let visible: &[&str] = if self.mode == Mode::AnswerAware {
            answers
        } else {
            &[]
        };
        let mut kept: Vec<String> = Vec::with_capacity(n);
        for round in 0..=self.cfg.max_regeneration_rounds {
            let need = n - kept.len();
            let mut req = ChatRequest::new(
                &self.cfg.model,
                self.template.render(question, visible, need),
            );
            req.temperature = self.cfg.temperature;
            req.seed = self.cfg.seed;
            let completion = self.chat.chat_complete(&req)?;
            let items = match parse_hint_list(&completion, need) {
                Ok(items) => items,
                Err(_) => {
                    log::warn!("{q_id}: round {round} returned no list items");
                    continue;
                }
            };
            for item in items {
                if self.cfg.leak_filter && leaks_answer(&item, answers) {
                    log::warn!("{q_id}: dropped a hint that contains the answer");
                    continue;
                }
                if kept.iter().any(|k| k.eq_ignore_ascii_case(&item)) {
                    continue;
                }
                kept.push(item);
            }
            if kept.len() == n {
                return Ok(kept);
            }
        }
        Err(GenerationError::GenerationFailed(q_id.to_string()))
    }
}

fn run(
    instances: Vec<(&str, &mut Instance)>,
    generator: &dyn HintGenerator,
    workers: usize,
    replace: bool,
) -> Result<Vec<usize>, GenerationError> {
    if generator.needs_answer() {
        if let Some((q_id, _)) = instances.iter().find(|(_, i)| i.answers.is_empty()) {
            return Err(GenerationError::MissingAnswer(q_id.to_string()));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| GenerationError::InvalidConfig(format!("worker pool: {e}")))?;
    let produced: Vec<Result<Vec<String>, GenerationError>> = pool.install(|| {
        instances
            .par_iter()
            .map(|(q_id, inst)| generator.generate(q_id, &inst.question.text, &inst.answer_texts()))
            .collect()
    });
    let produced = produced.into_iter().collect::<Result<Vec<_>, _>>()?;
    let source = generator.source();
    let mut added = Vec::with_capacity(produced.len());
    for ((_, inst), hints) in instances.into_iter().zip(produced) {
        if replace {
            inst.hints.clear();
        }
        added.push(hints.len());
        inst.hints
            .extend(hints.into_iter().map(|h| Hint::new(h, source.as_str())));
    }
    Ok(added)
}

/// Appends `cfg.num_hints` answer-aware hints to each instance. Nothing is
/// modified unless every instance succeeds.
pub fn generate_answer_aware<'a>(
    instances: impl IntoIterator<Item = (&'a str, &'a mut Instance)>,
    cfg: &GenerationConfig,
    chat: &dyn ChatClient,
) -> Result<(), GenerationError> {
    let generator = ChatHintGenerator::new(chat, cfg.clone(), Mode::AnswerAware)?;
    run(
        instances.into_iter().collect(),
        &generator,
        cfg.workers,
        false,
    )
    .map(drop)
}

/// Appends `cfg.num_hints` hints generated from the question alone.
pub fn generate_answer_agnostic<'a>(
    instances: impl IntoIterator<Item = (&'a str, &'a mut Instance)>,
    cfg: &GenerationConfig,
    chat: &dyn ChatClient,
) -> Result<(), GenerationError> {
    let generator = ChatHintGenerator::new(chat, cfg.clone(), Mode::AnswerAgnostic)?;
    run(
        instances.into_iter().collect(),
        &generator,
        cfg.workers,
        false,
    )
    .map(drop)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Remove existing hints of each processed instance first.
    pub replace: bool,
    /// Leave answerless instances alone instead of failing.
    pub skip_missing: bool,
    pub workers: usize,
}

/// Runs `generator` over every instance of `dataset`, all or nothing.
/// Returns the number of hints added per subset.
pub fn generate_with(
    dataset: &mut Dataset,
    generator: &dyn HintGenerator,
    opts: GenerateOptions,
) -> Result<BTreeMap<String, usize>, GenerationError> {
    let needs_answer = generator.needs_answer();
    let mut counts = BTreeMap::new();
    let mut batch = Vec::new();
    let mut owners = Vec::new();
    for (sname, subset) in dataset.subsets.iter_mut() {
        counts.insert(sname.clone(), 0usize);
        for (q_id, inst) in subset.instances.iter_mut() {
            if needs_answer && inst.answers.is_empty() && opts.skip_missing {
                log::warn!("{sname}/{q_id}: skipped, no answer");
                continue;
            }
            batch.push((q_id.as_str(), inst));
            owners.push(sname.clone());
        }
    }
    let added = run(batch, generator, opts.workers, opts.replace)?;
    for (sname, n) in owners.into_iter().zip(added) {
        *counts.get_mut(&sname).expect("subset counted") += n;
    }
    Ok(counts)
}

/// Chat-backed [`generate_with`] in the given mode.
pub fn generate_dataset(
    dataset: &mut Dataset,
    mode: Mode,
    cfg: &GenerationConfig,
    template: Option<PromptTemplate>,
    chat: &dyn ChatClient,
    opts: GenerateOptions,
) -> Result<BTreeMap<String, usize>, GenerationError> {
    let mut generator = ChatHintGenerator::new(chat, cfg.clone(), mode)?;
    if let Some(t) = template {
        generator = generator.with_template(t);
    }
    generate_with(
        dataset,
        &generator,
        GenerateOptions {
            workers: cfg.workers.max(opts.workers),
            ..opts
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::mock::{FnChat, ScriptedChat};
    use crate::model::Question;

    fn five() -> String {
        (1..=5)
            .map(|i| format!("{i}. Clue number {i}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn list_parsing() {
        assert_eq!(
            parse_hint_list("1. A\n2. B\n3. C", 3).unwrap(),
            ["A", "B", "C"]
        );
        assert_eq!(parse_hint_list("- only one", 3).unwrap(), ["only one"]);
        assert!(matches!(
            parse_hint_list("no list here", 3),
            Err(GenerationError::UnparseableCompletion(_))
        ));
        assert_eq!(
            parse_list_items("Sure!\n1) x\n* y\n3.\n1.5 million\n-5 degrees", 9),
            ["x", "y"]
        );
    }

    #[test]
    fn aware_fixture_gets_five_each() {
        let mut a = Instance::new(Question::new("Capital of France?")).with_answers(["Paris"]);
        let mut b = Instance::new(Question::new("Who wrote Hamlet?")).with_answers(["Shakespeare"]);
        let chat = FnChat::fixed(five());
        let cfg = GenerationConfig::new("llama", Mode::AnswerAware);
        generate_answer_aware([("a", &mut a), ("b", &mut b)], &cfg, &chat).unwrap();
        assert_eq!(a.hints.len(), 5);
        assert_eq!(b.hints.len(), 5);
        assert_eq!(a.hints[0].source, "model:llama/answer-aware");
    }

    #[test]
    fn aware_requires_answers() {
        let mut a = Instance::new(Question::new("Capital of France?"));
        let cfg = GenerationConfig::new("m", Mode::AnswerAware);
        let err =
            generate_answer_aware([("q1", &mut a)], &cfg, &FnChat::fixed(five())).unwrap_err();
        assert!(matches!(err, GenerationError::MissingAnswer(q) if q == "q1"));
    }

    #[test]
    fn leaking_hint_is_replaced() {
        let mut a = Instance::new(Question::new("Capital of France?")).with_answers(["Paris"]);
        let chat = ScriptedChat::new([
            "1. It has the Eiffel Tower.\n2. Its name is PARIS.",
            "1. It lies on the Seine.",
        ]);
        let mut cfg = GenerationConfig::new("m", Mode::AnswerAware);
        cfg.num_hints = 2;
        generate_answer_aware([("q", &mut a)], &cfg, &chat).unwrap();
        let texts: Vec<&str> = a.hints.iter().map(|h| h.text.as_str()).collect();
        assert_eq!(texts, ["It has the Eiffel Tower.", "It lies on the Seine."]);
        let reask = &chat.requests()[1];
        assert!(reask.user_text().contains("Write 1 hints"));
    }

    #[test]
    fn gives_up_after_rounds() {
        let mut a = Instance::new(Question::new("Capital of France?")).with_answers(["Paris"]);
        let cfg = GenerationConfig::new("m", Mode::AnswerAware);
        let chat = FnChat::fixed("1. Paris, of course");
        assert!(matches!(
            generate_answer_aware([("q", &mut a)], &cfg, &chat),
            Err(GenerationError::GenerationFailed(_))
        ));
        assert_eq!(chat.calls(), 3);
        assert!(a.hints.is_empty());
    }

    #[test]
    fn agnostic_truncates_and_ignores_answers() {
        let mut a = Instance::new(Question::new("Capital of France?"));
        let seven = (1..=7)
            .map(|i| format!("{i}. h{i}"))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = GenerationConfig::new("m", Mode::AnswerAgnostic);
        generate_answer_agnostic([("q", &mut a)], &cfg, &FnChat::fixed(seven)).unwrap();
        assert_eq!(a.hints.len(), 5);
        assert_eq!(a.hints[4].text, "h5");
        assert_eq!(a.hints[0].source, "model:m/answer-agnostic");

        let mut one = GenerationConfig::new("m", Mode::AnswerAgnostic);
        one.num_hints = 1;
        let mut b = Instance::new(Question::new("Q?"));
        generate_answer_agnostic([("q", &mut b)], &one, &FnChat::fixed(five())).unwrap();
        assert_eq!(b.hints.len(), 1);
    }

    #[test]
    fn dataset_level_append_replace_skip() {
        let mut ds = Dataset::new("d", "1");
        let sub = ds.subset_mut("test");
        sub.instances.insert(
            "a".into(),
            Instance::new(Question::new("Q1?"))
                .with_answers(["x"])
                .with_hints("human", ["old"]),
        );
        sub.instances
            .insert("b".into(), Instance::new(Question::new("Q2?")));
        let chat = FnChat::fixed(five());
        let cfg = GenerationConfig::new("m", Mode::AnswerAware);
        assert!(matches!(
            generate_dataset(
                &mut ds,
                Mode::AnswerAware,
                &cfg,
                None,
                &chat,
                GenerateOptions::default()
            ),
            Err(GenerationError::MissingAnswer(_))
        ));
        let opts = GenerateOptions {
            skip_missing: true,
            ..Default::default()
        };
        let counts = generate_dataset(&mut ds, Mode::AnswerAware, &cfg, None, &chat, opts).unwrap();
        assert_eq!(counts["test"], 5);
        let a = &ds.subsets["test"].instances["a"];
        assert_eq!(a.hints.len(), 6);
        assert_eq!(a.hints[0].text, "old");
        let opts = GenerateOptions {
            skip_missing: true,
            replace: true,
            ..Default::default()
        };
        generate_dataset(&mut ds, Mode::AnswerAware, &cfg, None, &chat, opts).unwrap();
        assert_eq!(ds.subsets["test"].instances["a"].hints.len(), 5);
        assert!(ds.subsets["test"].instances["b"].hints.is_empty());
    }

    #[test]
    fn template_file_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        std::fs::write(&p, "Be brief.\n---\nQ: {question} A: {answer} N: {n}\n").unwrap();
        let fallback = PromptTemplate::builtin("answer-aware-v1").unwrap();
        let t = PromptTemplate::from_file(&p, &fallback).unwrap();
        let msgs = t.render("Why?", &["Because"], 3);
        assert_eq!(msgs[0].content, "Be brief.");
        assert_eq!(msgs[1].content, "Q: Why? A: Because N: 3");
    }
}
