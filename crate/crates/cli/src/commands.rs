use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};

use hintkit::client::{
    load_static_vectors, ChatClient, DiskCache, Endpoint, HttpTransport, OpenAiChat, OpenAiEmbed,
    RemoteScorer, ResponseCache, RetryPolicy, ScoringBackend, TokenBucket, Transport,
    WikimediaPageviews,
};
use hintkit::enrich::{EntityProvider, RemoteEntities};
use hintkit::generation::{
    generate_dataset, GenerateOptions, GenerationConfig, Mode, PromptTemplate,
};
use hintkit::io::registry::{Registry, RegistryEntry};
use hintkit::io::{import_any, read_dataset, write_dataset, DatasetIoError};
use hintkit::metrics::{
    evaluate_dataset, load_frequency_table, Backends, EvaluationSummary, FnProgress, LinearScorer,
    MethodSpec, MetricConfig, MetricError,
};
use hintkit::report::{render, summarize, ReportFormat};

use crate::config::{EndpointSection, RunConfig, DEFAULT_CHAT_MODEL, DEFAULT_EMBED_MODEL};
use crate::{Cli, Command, DatasetCmd, EvaluateArgs, FormatArg, GenerateArgs, ModeArg, ReportArgs};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), cli.offline)?;
    match cli.command {
        Command::Dataset(cmd) => dataset(cmd, &cfg),
        Command::Generate(args) => generate(args, &cfg),
        Command::Evaluate(args) => evaluate(args, &cfg),
        Command::Report(args) => report(args),
    }
}

fn transport(cfg: &RunConfig) -> Arc<dyn Transport> {
    Arc::new(HttpTransport::new(cfg.offline))
}

fn endpoint(url: &str, section: &EndpointSection, transport: Arc<dyn Transport>) -> Endpoint {
    let mut ep = Endpoint::new(url, transport).with_api_key(section.key.clone());
    if let Some(n) = section.max_attempts {
        ep = ep.with_retry(RetryPolicy {
            max_attempts: n,
            ..RetryPolicy::default()
        });
    }
    if let Some(n) = section.max_in_flight {
        ep = ep.with_max_in_flight(n.max(1));
    }
    if let Some(rps) = section.requests_per_second.filter(|r| *r > 0.0) {
        ep = ep.with_rate_limit(TokenBucket::new(rps.ceil().max(1.0) as u32, rps));
    }
    ep
}

fn response_cache(
    cfg: &RunConfig,
    section: &EndpointSection,
    kind: &str,
) -> Result<Option<Arc<dyn ResponseCache>>> {
    if !section.cache {
        return Ok(None);
    }
    let dir = cfg.cache_dir.join("responses").join(kind);
    let cache = DiskCache::new(&dir)
        .with_context(|| format!("opening response cache {}", dir.display()))?;
    Ok(Some(Arc::new(cache)))
}

fn chat_client(cfg: &RunConfig, model: &str) -> Result<Option<Arc<dyn ChatClient>>> {
    let Some(url) = &cfg.chat.url else {
        return Ok(None);
    };
    let mut chat = OpenAiChat::new(endpoint(url, &cfg.chat, transport(cfg)), model);
    if let Some(cache) = response_cache(cfg, &cfg.chat, "chat")? {
        chat = chat.with_cache(cache);
    }
    Ok(Some(Arc::new(chat)))
}

fn registry(cfg: &RunConfig) -> Result<Registry> {
    let url = cfg.registry_url.clone().ok_or_else(|| {
        anyhow!(
            "no registry configured; set HINTKIT_REGISTRY_URL or `registry_url` in the config file"
        )
    })?;
    Ok(Registry::new(url, &cfg.cache_dir, transport(cfg)))
}

/// `14645` → `14,645`.
fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn print_table(rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c >= 4 {
                    format!("{cell:>w$}")
                } else {
                    format!("{cell:<w$}")
                }
            })
            .collect();
        println!("{}", line.join("  ").trim_end());
    }
}

fn subset_rows<'a>(entries: impl IntoIterator<Item = &'a RegistryEntry>) -> Vec<Vec<String>> {
    let yes_no = |b: bool| if b { "yes" } else { "no" }.to_string();
    let mut rows = vec![[
        "Dataset",
        "Subset",
        "Finetuned",
        "Use Answer",
        "Num. of Qs",
        "Num. of Hs",
    ]
    .map(String::from)
    .to_vec()];
    for e in entries {
        for s in &e.subsets {
            rows.push(vec![
                e.dataset_name.clone(),
                s.name.clone(),
                yes_no(s.finetuned),
                yes_no(s.uses_answer),
                thousands(s.num_questions),
                thousands(s.num_hints),
            ]);
        }
    }
    rows
}

fn dataset(cmd: DatasetCmd, cfg: &RunConfig) -> Result<ExitCode> {
    match cmd {
        DatasetCmd::List { update } => {
            let manifest = registry(cfg)?.available_datasets(update)?;
            print_table(&subset_rows(&manifest.entries));
        }
        DatasetCmd::Info { name, update } => {
            let manifest = registry(cfg)?.available_datasets(update)?;
            let entry = manifest
                .entry(&name)
                .ok_or_else(|| anyhow!("dataset `{name}` is not in the registry"))?;
            if !entry.description.is_empty() {
                println!("{}\n", entry.description);
            }
            print_table(&subset_rows([entry]));
        }
        DatasetCmd::Download { name, output } => {
            let ds = registry(cfg)?.download_dataset(&name)?;
            println!(
                "{name}: {} subsets, {} questions, {} hints",
                ds.subsets.len(),
                ds.num_instances(),
                ds.num_hints()
            );
            if let Some(out) = output {
                write_dataset(&out, &ds)?;
            }
        }
        DatasetCmd::Validate { file } => {
            let bytes =
                std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            match import_any(&bytes) {
                Ok(ds) => println!(
                    "{}: valid ({} instances, {} hints)",
                    file.display(),
                    ds.num_instances(),
                    ds.num_hints()
                ),
                Err(DatasetIoError::ValidationFailed(violations)) => {
                    for v in &violations {
                        println!("{v}");
                    }
                    eprintln!("{}: {} violation(s)", file.display(), violations.len());
                    return Ok(ExitCode::FAILURE);
                }
                Err(e) => return Err(e).with_context(|| format!("loading {}", file.display())),
            }
        }
        DatasetCmd::Convert { input, output } => {
            let ds = load(&input)?;
            write_dataset(&output, &ds).with_context(|| format!("writing {}", output.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<hintkit::Dataset> {
    read_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn generate(args: GenerateArgs, cfg: &RunConfig) -> Result<ExitCode> {
    let mode = match args.mode {
        ModeArg::Aware => Mode::AnswerAware,
        ModeArg::Agnostic => Mode::AnswerAgnostic,
    };
    if cfg.offline {
        bail!("generation needs a chat endpoint, but offline mode is on");
    }
    let model = args
        .model
        .clone()
        .or_else(|| cfg.chat.model.clone())
        .unwrap_or_else(|| DEFAULT_CHAT_MODEL.to_string());
    let chat = chat_client(cfg, &model)?.ok_or_else(|| {
        anyhow!("no chat endpoint; set HINTKIT_CHAT_URL or [chat] url in the config file")
    })?;

    let file = &cfg.file.generation;
    let mut gen = GenerationConfig::new(&model, mode);
    gen.num_hints = args.n_hints.or(file.num_hints).unwrap_or(gen.num_hints);
    gen.temperature = args
        .temperature
        .or(file.temperature)
        .unwrap_or(gen.temperature);
    gen.max_regeneration_rounds = file
        .max_regeneration_rounds
        .unwrap_or(gen.max_regeneration_rounds);
    gen.seed = args.seed.or(file.seed);
    gen.workers = file.workers.unwrap_or(0);
    if args.no_leak_filter {
        gen.leak_filter = false;
    }
    let template = match args.template.as_ref().or(file.template.as_ref()) {
        Some(path) => Some(PromptTemplate::from_file(
            path,
            &PromptTemplate::builtin(mode.default_template())?,
        )?),
        None => None,
    };

    let mut ds = load(&args.input)?;
    let opts = GenerateOptions {
        replace: args.replace,
        skip_missing: args.skip_missing,
        workers: gen.workers,
    };
    let counts = generate_dataset(&mut ds, mode, &gen, template, chat.as_ref(), opts)?;
    write_dataset(&args.output, &ds)
        .with_context(|| format!("writing {}", args.output.display()))?;
    for (subset, n) in counts {
        println!("{subset}: {n} hints generated");
    }
    Ok(ExitCode::SUCCESS)
}

fn split_pair<'a>(s: &'a str, what: &str) -> Result<(&'a str, &'a str)> {
    s.split_once('=')
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| anyhow!("expected {what}, got `{s}`"))
}

fn backends(args: &EvaluateArgs, cfg: &RunConfig) -> Result<Backends> {
    let eval = &cfg.file.evaluation;
    let model = args
        .model
        .clone()
        .or_else(|| cfg.chat.model.clone())
        .unwrap_or_else(|| DEFAULT_CHAT_MODEL.to_string());
    let mut b = Backends {
        offline: cfg.offline,
        chat_model: Some(model.clone()),
        ..Backends::default()
    };
    if !cfg.offline {
        b.chat = chat_client(cfg, &model)?;
        if let Some(url) = &cfg.embed.url {
            let embed_model = cfg
                .embed
                .model
                .clone()
                .unwrap_or_else(|| DEFAULT_EMBED_MODEL.to_string());
            let mut embed =
                OpenAiEmbed::new(endpoint(url, &cfg.embed, transport(cfg)), embed_model);
            if let Some(n) = cfg.embed.batch_size {
                embed = embed.with_batch_size(n);
            }
            if let Some(cache) = response_cache(cfg, &cfg.embed, "embed")? {
                embed = embed.with_cache(cache);
            }
            b.embed = Some(Arc::new(embed));
        }
        let pv = Endpoint::new(&cfg.pageviews_url, transport(cfg));
        b.pageviews = Some(Arc::new(WikimediaPageviews::new(pv)));
        if let Some(url) = &eval.entities_url {
            let provider: Arc<dyn EntityProvider> =
                Arc::new(RemoteEntities::new(Endpoint::new(url, transport(cfg))));
            b.entities = Some(provider);
        }
        let mut remote: BTreeMap<String, String> = eval.scorers.clone();
        for pair in &args.remote_scorers {
            let (k, v) = split_pair(pair, "METHOD=URL")?;
            remote.insert(k.to_string(), v.to_string());
        }
        for (method, url) in remote {
            let scorer: Arc<dyn ScoringBackend> =
                Arc::new(RemoteScorer::new(Endpoint::new(url, transport(cfg))));
            b.scorers.insert(method, scorer);
        }
    }
    if let Some(path) = args.freq_table.as_ref().or(eval.freq_table.as_ref()) {
        b.frequency = Some(Arc::new(load_frequency_table(path)?));
    }
    if let Some(path) = args.vectors.as_ref().or(eval.vectors.as_ref()) {
        let table = load_static_vectors(path)
            .with_context(|| format!("loading vectors {}", path.display()))?;
        b.vectors = Some(Arc::new(table));
    }
    let mut linear: BTreeMap<String, std::path::PathBuf> = eval.linear_scorers.clone();
    for pair in &args.scorers {
        let (k, v) = split_pair(pair, "LABEL=PATH")?;
        linear.insert(k.to_string(), v.into());
    }
    for (label, path) in linear {
        b.linear.insert(label, Arc::new(LinearScorer::load(&path)?));
    }
    Ok(b)
}

fn metric_config(args: &EvaluateArgs, cfg: &RunConfig) -> Result<MetricConfig> {
    let eval = &cfg.file.evaluation;
    let mut config = match (&args.metrics, &eval.metrics) {
        (Some(list), _) => MetricConfig::parse_list(list)?,
        (None, Some(list)) => MetricConfig::parse_list(&list.join(","))?,
        (None, None) => MetricConfig::offline_default(),
    };
    for spec in &mut config.methods {
        apply_params(spec, &eval.params)?;
        if spec.name() == "familiarity/wikipedia" && !spec.params.contains_key("window_days") {
            if let Some(days) = cfg.window_days {
                spec.params.insert("window_days".into(), days.into());
            }
        }
    }
    config.overwrite = args.overwrite;
    config.workers = args.workers.or(eval.workers).unwrap_or(0);
    Ok(config)
}

fn apply_params(spec: &mut MethodSpec, params: &BTreeMap<String, toml::Table>) -> Result<()> {
    if let Some(table) = params.get(&spec.name()) {
        for (k, v) in table {
            spec.params.insert(k.clone(), serde_json::to_value(v)?);
        }
    }
    Ok(())
}

fn print_summary(summary: &EvaluationSummary) {
    println!(
        "{} computed, {} skipped, {} failed",
        summary.computed, summary.skipped, summary.failed
    );
    for (method, stats) in &summary.methods {
        if stats.failed > 0 {
            eprintln!(
                "warning: {method}: {} failed ({})",
                stats.failed,
                stats.first_error.as_deref().unwrap_or("unknown error")
            );
        }
    }
    println!("subset\tmetric\tmean");
    for (subset, means) in &summary.means {
        for (metric, mean) in means {
            println!("{subset}\t{metric}\t{mean:.4}");
        }
    }
}

fn evaluate(args: EvaluateArgs, cfg: &RunConfig) -> Result<ExitCode> {
    let config = metric_config(&args, cfg)?;
    let backends = backends(&args, cfg)?;
    let mut ds = load(&args.input)?;
    let show = args.progress;
    let sink = FnProgress(move |done: usize, total: usize| {
        if show {
            eprint!("\r{done}/{total} instances");
            if done == total {
                eprintln!();
            }
        }
    });
    let summary = match evaluate_dataset(&mut ds, &config, &backends, &sink) {
        Ok(s) => s,
        Err(e @ MetricError::BackendUnavailable(_)) if cfg.offline => {
            bail!("{e} (offline mode)")
        }
        Err(e) => return Err(e.into()),
    };
    write_dataset(&args.output, &ds)
        .with_context(|| format!("writing {}", args.output.display()))?;
    print_summary(&summary);
    if summary.all_failed() {
        eprintln!("error: every requested method failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let ds = load(&args.input)?;
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Md => ReportFormat::Markdown,
    };
    let text = render(&summarize(&ds)?, format, args.long)?;
    match args.output {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
