//! Acceptance checks, one test per criterion. Each test also writes a
//! `[PASS]`/`[FAIL]` line straight to stderr so the verdicts show up even
//! when the harness captures output.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use hintkit::client::mock::{hashed_vector, ScriptedChat};
use hintkit::client::{
    ChatClient, ClientError, Endpoint, HttpRequest, HttpResponse, HttpTransport, OpenAiChat,
    OpenAiEmbed, RemoteScorer, RetryPolicy, Transport, VectorTable, WikimediaPageviews,
};
use hintkit::io::registry::{Registry, RegistryError, RegistryManifest};
use hintkit::io::{export_archive, export_json, import_archive, import_json};
use hintkit::metrics::{
    answerleakage_lexical, convergence_llm, evaluate_dataset, familiarity_wordfreq,
    readability_linear, readability_traditional, relevance_rouge, relevance_static_embedding,
    rouge_tokens, Backends, Banding, Formula, FrequencyTable, LinearScorer, MethodSpec,
    MetricConfig, MetricError, RougeVariant, FEATURES,
};
use hintkit::model::{
    attach_metric, Entity, EntityLabel, MetricRange, MetricResult, QTypeMajor, QuestionType,
};
use hintkit::{Answer, Dataset, Hint, Instance, Question};

fn criterion(n: u32, what: &str, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "[{verdict}] criterion {n}: {what} ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
    if let Err(panic) = outcome {
        resume_unwind(panic);
    }
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// n-gram multiset intersection by sorting both gram lists and merging.
fn oracle_ngram_overlap(a: &[String], b: &[String], n: usize) -> (u64, u64, u64) {
    let grams = |s: &[String]| -> Vec<String> {
        if s.len() < n {
            return Vec::new();
        }
        let mut g: Vec<String> = (0..=s.len() - n)
            .map(|i| s[i..i + n].join("\u{1}"))
            .collect();
        g.sort();
        g
    };
    let (ga, gb) = (grams(a), grams(b));
    let (mut i, mut j, mut common) = (0, 0, 0u64);
    while i < ga.len() && j < gb.len() {
        match ga[i].cmp(&gb[j]) {
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    (common, ga.len() as u64, gb.len() as u64)
}

/// Textbook O(n·m) longest-common-subsequence table.
fn oracle_lcs(a: &[String], b: &[String]) -> u64 {
    let mut t = vec![vec![0u64; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

/// F1 of precision `o/h` and recall `o/q` in exact rational arithmetic,
/// rounded to f64 once at the end.
fn oracle_f1(o: u64, h: u64, q: u64) -> f64 {
    if o == 0 || h == 0 || q == 0 {
        return 0.0;
    }
    // p = o/h, r = o/q, F = 2pr / (p + r)
    let num = 2 * (o as u128) * (o as u128) * (h as u128) * (q as u128);
    let den = (h as u128) * (q as u128) * ((o as u128) * (q as u128) + (o as u128) * (h as u128));
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn oracle_rouge(h: &[String], q: &[String], variant: RougeVariant) -> f64 {
    if h.is_empty() || q.is_empty() {
        return 0.0;
    }
    match variant {
        RougeVariant::Rouge1 => {
            let (o, a, b) = oracle_ngram_overlap(h, q, 1);
            oracle_f1(o, a, b)
        }
        RougeVariant::Rouge2 => {
            if h.len() < 2 && q.len() < 2 {
                return if h == q { 1.0 } else { 0.0 };
            }
            let (o, a, b) = oracle_ngram_overlap(h, q, 2);
            oracle_f1(o, a, b)
        }
        RougeVariant::RougeL => oracle_f1(oracle_lcs(h, q), h.len() as u64, q.len() as u64),
    }
}

// ---------------------------------------------------------------------------
// Stub HTTP servers and CLI helpers
// ---------------------------------------------------------------------------

type Handler = dyn Fn(&str, &str, &[u8]) -> (u16, Vec<u8>) + Send + 'static;

/// Serves `handler(method, url, body)` on an ephemeral local port.
fn stub(handler: Box<Handler>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind stub server");
    let port = server.server_addr().to_ip().expect("ip listener").port();
    std::thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = Vec::new();
            let _ = req.as_reader().read_to_end(&mut body);
            let (status, out) = handler(req.method().as_str(), req.url(), &body);
            let _ = req.respond(tiny_http::Response::from_data(out).with_status_code(status));
        }
    });
    format!("http://127.0.0.1:{port}")
}

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures"))
}

/// The CLI with a clean, hermetic environment.
fn hintkit(home: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hintkit"));
    for (k, _) in std::env::vars() {
        if k.starts_with("HINTKIT_") {
            cmd.env_remove(k);
        }
    }
    cmd.env("HOME", home)
        .env("XDG_CONFIG_HOME", home.join("config"))
        .env("HINTKIT_CACHE_DIR", home.join("cache"))
        .env("RUST_LOG", "error");
    cmd
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "command failed ({}):\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn chat_reply(content: &str) -> Vec<u8> {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]})
        .to_string()
        .into_bytes()
}

// ---------------------------------------------------------------------------
// Random data
// ---------------------------------------------------------------------------

const VOCAB: &[&str] = &[
    "the", "a", "of", "cat", "dog", "sat", "ran", "on", "mat", "red", "blue", "paris", "is", "in",
    "france", "river", "city", "old", "king", "queen",
];

fn random_tokens(rng: &mut StdRng, max_len: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    let vocab = rng.gen_range(2..=VOCAB.len());
    (0..len)
        .map(|_| VOCAB[rng.gen_range(0..vocab)].to_string())
        .collect()
}

const FRAGMENTS: &[&str] = &[
    "The",
    "cat",
    "sat",
    "on",
    "the",
    "mat",
    ".",
    "!",
    "?",
    "Photosynthesis",
    "is",
    "remarkable",
    "Nelson",
    "Mandela",
    "1994",
    "don't",
    "O'Neill",
    "—",
    "...",
    "Zürich",
    "naïve",
    "",
    " ",
    "\n",
    "42",
    "extraordinarily",
    "a",
    "it",
    "of",
    "rhythm",
    "queue",
    "strengths",
    "Ω",
    "日本",
    ",",
    "table",
    "committee",
    "I",
];

fn random_text(rng: &mut StdRng) -> String {
    let n = rng.gen_range(0..30);
    let mut s = String::new();
    for _ in 0..n {
        s.push_str(FRAGMENTS.choose(rng).unwrap());
        if rng.gen_bool(0.8) {
            s.push(' ');
        }
    }
    s
}

fn random_word(rng: &mut StdRng) -> String {
    const CHARS: &[char] = &[
        'a', 'b', 'k', 'z', 'Q', '/', '~', ' ', 'é', '日', '0', '_', '"', '\\',
    ];
    let n = rng.gen_range(1..8);
    (0..n).map(|_| *CHARS.choose(rng).unwrap()).collect()
}

fn random_float(rng: &mut StdRng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen::<f64>(),
        1 => rng.gen_range(-1e9..1e9),
        2 => f64::from_bits(
            rng.gen::<u64>() & !(0x7ffu64 << 52) | (rng.gen_range(900u64..1100) << 52),
        ),
        _ => rng.gen_range(0..1000) as f64 / 7.0,
    }
}

fn random_metadata(rng: &mut StdRng) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    for _ in 0..rng.gen_range(0..3) {
        let v = match rng.gen_range(0..5) {
            0 => json!(random_word(rng)),
            1 => json!(rng.gen_range(-1000i64..1000)),
            2 => json!(random_float(rng)),
            3 => json!([rng.gen_bool(0.5), null]),
            _ => json!({"nested": random_word(rng)}),
        };
        m.insert(random_word(rng), v);
    }
    m
}

fn random_entities(rng: &mut StdRng, text: &str) -> Vec<Entity> {
    let len = text.chars().count();
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        if len == 0 {
            break;
        }
        let start = rng.gen_range(0..len);
        let end = rng.gen_range(start + 1..=len);
        let label = *EntityLabel::ALL.choose(rng).unwrap();
        out.push(Entity::from_span(text, start, end, label).unwrap());
    }
    out
}

fn random_metrics(rng: &mut StdRng) -> BTreeMap<String, hintkit::model::Metric> {
    let mut holder = Hint::new("x", "s");
    for _ in 0..rng.gen_range(0..4) {
        let (name, value) = match rng.gen_range(0..4) {
            0 => ("relevance/rouge/rougeL".to_string(), rng.gen::<f64>()),
            1 => (
                "readability/traditional/smog".to_string(),
                rng.gen_range(0..3) as f64,
            ),
            2 => (
                "answerleakage/lexical/nostop".to_string(),
                rng.gen_range(0..=4) as f64 / 4.0,
            ),
            _ => (format!("custom/{}", random_word(rng)), random_float(rng)),
        };
        let mut r = MetricResult::new(name, value);
        if rng.gen_bool(0.3) {
            r = r.with_detail(json!({"raw": random_float(rng)}));
        }
        attach_metric(&mut holder, r).unwrap();
    }
    holder.metrics
}

fn random_text_unit(rng: &mut StdRng) -> String {
    let t = random_text(rng);
    if t.is_empty() {
        random_word(rng)
    } else {
        t
    }
}

fn random_dataset(rng: &mut StdRng) -> Dataset {
    let mut ds = Dataset::new(
        random_word(rng),
        format!("{}.{}", rng.gen_range(0..9), rng.gen_range(0..9)),
    );
    ds.url = if rng.gen_bool(0.5) {
        "https://example.org/d".into()
    } else {
        String::new()
    };
    ds.description = random_text(rng);
    ds.metadata = random_metadata(rng);
    for s in 0..rng.gen_range(1..4) {
        let name = format!("{}{s}", random_word(rng));
        let sub = ds.subset_mut(&name);
        sub.metadata = random_metadata(rng);
        for _ in 0..rng.gen_range(0..5) {
            let mut q = Question::new(random_text_unit(rng));
            q.entities = random_entities(rng, &q.text.clone());
            q.metrics = random_metrics(rng);
            if rng.gen_bool(0.5) {
                q.question_type = Some(QuestionType {
                    major: *[QTypeMajor::Human, QTypeMajor::Location, QTypeMajor::Numeric]
                        .choose(rng)
                        .unwrap(),
                    minor: random_word(rng),
                });
            }
            let mut inst = Instance::new(q);
            for _ in 0..rng.gen_range(0..3) {
                let mut a = Answer::new(random_text_unit(rng));
                a.entities = random_entities(rng, &a.text.clone());
                a.metrics = random_metrics(rng);
                inst.answers.push(a);
            }
            for _ in 0..rng.gen_range(0..5) {
                let mut h = Hint::new(random_text_unit(rng), random_word(rng));
                h.entities = random_entities(rng, &h.text.clone());
                h.metrics = random_metrics(rng);
                h.metadata = random_metadata(rng);
                inst.hints.push(h);
            }
            inst.metadata = random_metadata(rng);
            sub.instances.insert(random_word(rng), inst);
        }
    }
    ds
}

// ---------------------------------------------------------------------------
// 1. ROUGE oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_rouge_matches_brute_force_oracle() {
    criterion(
        1,
        "rouge1/rouge2/rougeL equal the brute-force oracle on 200 pairs",
        || {
            let start = Instant::now();
            let mut rng = StdRng::seed_from_u64(1);
            for pair in 0..200 {
                let h = random_tokens(&mut rng, 20);
                let q = random_tokens(&mut rng, 20);
                for v in [
                    RougeVariant::Rouge1,
                    RougeVariant::Rouge2,
                    RougeVariant::RougeL,
                ] {
                    let expected = oracle_rouge(&h, &q, v);
                    assert_eq!(
                        rouge_tokens(&h, &q, v),
                        expected,
                        "pair {pair} {v:?}: {h:?} vs {q:?}"
                    );
                    // the text entry point tokenizes to the same sequences
                    assert_eq!(relevance_rouge(&h.join(" "), &q.join(" "), v), expected);
                }
            }
            let hand = |h: &str, q: &str| relevance_rouge(h, q, RougeVariant::Rouge1);
            assert!((hand("the cat sat on the mat", "the cat ran") - 4.0 / 9.0).abs() < 1e-15);
            assert!(
                start.elapsed() < Duration::from_secs(5),
                "took {:?}",
                start.elapsed()
            );
        },
    );
}

// ---------------------------------------------------------------------------
// 2. Readability formulas
// ---------------------------------------------------------------------------

/// Hand analysis (words, sentences, syllables, 3+-syllable words, letters)
/// and the formula values computed from it.
#[rustfmt::skip]
const READABILITY_REFERENCE: &[(&str, [f64; 5])] = &[
    // W=3 S=1 Syl=3 complex=0 letters=9
    ("The cat sat.",
     [119.19, 1.2, -8.026666667, 3.1291, -5.80]),
    // W=10 S=2 Syl=11 complex=0 letters=29
    ("My dog can run in the park. It is happy.",
     [108.7, 2.0, -4.668, 3.1291, -5.271]),
    // W=6 S=1 Syl=17 (5+2+2+2+3+3) complex=3 letters=48
    ("Photosynthesis converts sunlight into chemical energy.",
     [-38.955, 22.4, 26.306666667, 13.023866799, 19.25]),
    // W=12 S=2 Syl=22 complex=3 (committee, proposal, tomorrow) letters=71
    ("The committee will review the proposal tomorrow. Students should attend the meeting!",
     [45.645, 12.4, 14.056666667, 10.125756702, 9.4375]),
    // W=7 S=1 Syl=24 (5+5+2+3+3+2+4) complex=5 letters=67
    ("International organizations provide medical assistance during emergencies.",
     [-90.327142857, 31.371428571, 36.251428571, 15.903189009, 27.151428571]),
];

#[test]
fn criterion_02_readability_formulas_match_hand_values() {
    criterion(
        2,
        "five formulas on five hand-analyzed sentences within 1e-6",
        || {
            let formulas = [
                Formula::Flesch,
                Formula::GunningFog,
                Formula::ColemanLiau,
                Formula::Smog,
                Formula::Ari,
            ];
            let banding = Banding::default();
            for (text, expected) in READABILITY_REFERENCE {
                for (f, want) in formulas.iter().zip(expected) {
                    let got = readability_traditional(text, *f, &banding).unwrap();
                    assert!(
                        (got.raw - want).abs() < 1e-6,
                        "{text:?} {f:?}: {} vs {want}",
                        got.raw
                    );
                }
            }
            let fourth = READABILITY_REFERENCE[3].0;
            let levels: Vec<u8> = formulas
                .iter()
                .map(|f| readability_traditional(fourth, *f, &banding).unwrap().level)
                .collect();
            assert_eq!(levels, [2, 2, 2, 1, 1]);
        },
    );
}

// ---------------------------------------------------------------------------
// 3. Range fuzzing
// ---------------------------------------------------------------------------

fn check_range(name: &str, value: f64) {
    assert!(value.is_finite(), "{name} produced {value}");
    assert!(
        MetricRange::for_name(name).contains(value),
        "{name} produced {value}"
    );
}

#[test]
fn criterion_03_offline_scores_stay_in_range() {
    criterion(
        3,
        "10,000 fuzzed offline evaluations stay within declared ranges",
        || {
            let mut rng = StdRng::seed_from_u64(3);
            let words = [
                "the", "cat", "sat", "paris", "mandela", "river", "king", "42", "don't",
            ];
            let vectors = VectorTable::from_rows(words.iter().map(|w| {
                (
                    w.to_string(),
                    (0..4)
                        .map(|_| rng.gen_range(-1.0f32..1.0))
                        .collect::<Vec<_>>(),
                )
            }))
            .unwrap();
            let freq: FrequencyTable = words.iter().map(|w| (*w, rng.gen::<f64>())).collect();
            let banding = Banding::default();
            let mut evaluations = 0usize;
            while evaluations < 10_000 {
                let hint = random_text(&mut rng);
                let question = random_text(&mut rng);
                let answers: Vec<String> = (0..rng.gen_range(0..3))
                    .map(|_| random_text(&mut rng))
                    .collect();
                let answers: Vec<&str> = answers.iter().map(String::as_str).collect();
                for v in [
                    RougeVariant::Rouge1,
                    RougeVariant::Rouge2,
                    RougeVariant::RougeL,
                ] {
                    check_range("relevance/rouge/x", relevance_rouge(&hint, &question, v));
                    evaluations += 1;
                }
                check_range(
                    "relevance/noncontextual/x",
                    relevance_static_embedding(&hint, &question, &vectors).value,
                );
                evaluations += 1;
                for f in Formula::ALL {
                    match readability_traditional(&hint, f, &banding) {
                        Ok(s) => check_range("readability/traditional/x", f64::from(s.level)),
                        Err(MetricError::EmptyText) => {
                            assert!(hintkit::enrich::tokenize(&hint).is_empty())
                        }
                        Err(e) => panic!("{e}"),
                    }
                    evaluations += 1;
                }
                let scorer = LinearScorer {
                    feature_names: FEATURES.iter().map(|f| f.to_string()).collect(),
                    weights: (0..FEATURES.len())
                        .map(|_| rng.gen_range(-3.0..3.0))
                        .collect(),
                    bias: rng.gen_range(-3.0..3.0),
                    class_thresholds: [-1.0, 1.0],
                };
                if let Ok(out) = readability_linear(&hint, &scorer) {
                    check_range("readability/ml/x", out.value);
                }
                evaluations += 1;
                for stop in [true, false] {
                    check_range(
                        "familiarity/wordfreq/x",
                        familiarity_wordfreq(&hint, &freq, stop).value,
                    );
                    check_range(
                        "answerleakage/lexical/x",
                        answerleakage_lexical(&hint, &answers, stop).value,
                    );
                    evaluations += 2;
                }
            }
            assert!(evaluations >= 10_000);
        },
    );
}

// ---------------------------------------------------------------------------
// 4. Round-trips
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_random_datasets_round_trip() {
    criterion(
        4,
        "100 random datasets survive JSON and archive round-trips; export is deterministic",
        || {
            let mut rng = StdRng::seed_from_u64(4);
            for i in 0..100 {
                let ds = random_dataset(&mut rng);
                let json = export_json(&ds).unwrap();
                let back = import_json(&json).unwrap_or_else(|e| panic!("dataset {i}: {e}"));
                assert_eq!(back, ds, "dataset {i} JSON round-trip");
                assert_eq!(export_json(&back).unwrap(), json, "dataset {i} re-export");
                assert_eq!(export_json(&ds).unwrap(), json, "dataset {i} repeat export");
                let archive = export_archive(&ds).unwrap();
                assert_eq!(
                    import_archive(&archive).unwrap(),
                    ds,
                    "dataset {i} archive round-trip"
                );
                assert_eq!(
                    export_archive(&ds).unwrap(),
                    archive,
                    "dataset {i} archive bytes"
                );
            }
        },
    );
}

// ---------------------------------------------------------------------------
// 5. Convergence transcripts
// ---------------------------------------------------------------------------

struct Transcript {
    candidates: Vec<(String, bool)>,
    /// verdicts[h][c]: true = still plausible
    verdicts: Vec<Vec<bool>>,
}

fn hand_convergence(t: &Transcript, hint: usize) -> f64 {
    let incorrect: Vec<usize> = (0..t.candidates.len())
        .filter(|&c| !t.candidates[c].1)
        .collect();
    if incorrect.is_empty() {
        return 1.0;
    }
    let gold_lost = (0..t.candidates.len()).any(|c| t.candidates[c].1 && !t.verdicts[hint][c]);
    if gold_lost {
        return 0.0;
    }
    let eliminated = incorrect.iter().filter(|&&c| !t.verdicts[hint][c]).count();
    eliminated as f64 / incorrect.len() as f64
}

fn run_transcript(t: &Transcript, gold: &[&str]) -> Vec<f64> {
    let listing: Vec<String> = t
        .candidates
        .iter()
        .enumerate()
        .map(|(i, (c, _))| format!("{}. {c}", i + 1))
        .collect();
    let mut replies = vec![listing.join("\n")];
    for row in &t.verdicts {
        for &yes in row {
            replies.push(if yes { "Yes." } else { "No" }.to_string());
        }
    }
    let chat = ScriptedChat::new(replies);
    let hints: Vec<String> = (0..t.verdicts.len()).map(|i| format!("hint {i}")).collect();
    let hints: Vec<&str> = hints.iter().map(String::as_str).collect();
    let report = convergence_llm(
        "Which city?",
        gold,
        &hints,
        &chat,
        t.candidates.len().max(2),
        "judge",
    )
    .unwrap();
    for (c, (text, is_gold)) in report.candidates.iter().zip(&t.candidates) {
        assert_eq!(&c.text, text);
        assert_eq!(c.is_gold, *is_gold);
    }
    report.per_hint.iter().map(|h| h.score).collect()
}

#[test]
fn criterion_05_convergence_matches_hand_formula() {
    criterion(
        5,
        "convergence_llm equals the hand formula on 20 scripted transcripts",
        || {
            let names = [
                "Paris", "Lyon", "Nice", "Lille", "Metz", "Brest", "Tours", "Dijon",
            ];
            let mut transcripts = vec![
                // 2 of 4 incorrect eliminated, gold survives -> 0.5
                Transcript {
                    candidates: ["Paris", "Nice", "Lille", "Metz", "Brest"]
                        .iter()
                        .enumerate()
                        .map(|(i, n)| (n.to_string(), i == 0))
                        .collect(),
                    verdicts: vec![vec![true, false, false, true, true]],
                },
                // gold eliminated -> 0.0
                Transcript {
                    candidates: ["Paris", "Nice", "Lille", "Metz", "Brest"]
                        .iter()
                        .enumerate()
                        .map(|(i, n)| (n.to_string(), i == 0))
                        .collect(),
                    verdicts: vec![vec![false, false, false, false, false]],
                },
            ];
            let mut rng = StdRng::seed_from_u64(5);
            while transcripts.len() < 20 {
                let k = rng.gen_range(2..=names.len());
                let mut chosen: Vec<&str> = names.to_vec();
                chosen.shuffle(&mut rng);
                let candidates: Vec<(String, bool)> = chosen[..k]
                    .iter()
                    .map(|n| (n.to_string(), *n == "Paris" || *n == "Lyon"))
                    .collect();
                let hints = rng.gen_range(1..4);
                let verdicts = (0..hints)
                    .map(|_| (0..k).map(|_| rng.gen_bool(0.5)).collect())
                    .collect();
                transcripts.push(Transcript {
                    candidates,
                    verdicts,
                });
            }
            assert_eq!(
                run_transcript(&transcripts[0], &["paris", "LYON"]),
                vec![0.5]
            );
            assert_eq!(
                run_transcript(&transcripts[1], &["paris", "LYON"]),
                vec![0.0]
            );
            for (i, t) in transcripts.iter().enumerate() {
                let gold = ["paris", "LYON"];
                let expected: Vec<f64> = (0..t.verdicts.len())
                    .map(|h| hand_convergence(t, h))
                    .collect();
                assert_eq!(run_transcript(t, &gold), expected, "transcript {i}");
            }
        },
    );
}

// ---------------------------------------------------------------------------
// 6. Answer leakage
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_lexical_leakage_endpoints_and_monotonicity() {
    criterion(
        6,
        "lexical leakage endpoints and monotonicity over 1,000 augmentations",
        || {
            assert_eq!(
                answerleakage_lexical("He was Nelson Mandela", &["Nelson Mandela"], false).value,
                1.0
            );
            assert_eq!(
                answerleakage_lexical("A quiet village", &["Nelson Mandela"], false).value,
                0.0
            );
            assert_eq!(
                answerleakage_lexical("It ended in a trial", &["the Rivonia Trial"], false).value,
                0.5
            );

            let mut rng = StdRng::seed_from_u64(6);
            for case in 0..1000 {
                let hint = random_tokens(&mut rng, 12);
                let answers: Vec<String> = (0..rng.gen_range(1..3))
                    .map(|_| random_tokens(&mut rng, 5).join(" "))
                    .collect();
                let answer_refs: Vec<&str> = answers.iter().map(String::as_str).collect();
                let mut augmented = hint.clone();
                let pool: Vec<&str> = answers
                    .iter()
                    .flat_map(|a| a.split(' '))
                    .filter(|t| !t.is_empty())
                    .collect();
                for _ in 0..rng.gen_range(1..4) {
                    if let Some(tok) = pool.choose(&mut rng) {
                        let at = rng.gen_range(0..=augmented.len());
                        augmented.insert(at, tok.to_string());
                    }
                }
                for stop in [true, false] {
                    let before = answerleakage_lexical(&hint.join(" "), &answer_refs, stop).value;
                    let after =
                        answerleakage_lexical(&augmented.join(" "), &answer_refs, stop).value;
                    assert!(after >= before, "case {case}: {before} -> {after}");
                }
                // without stopwords in the answer, both variants agree
                let content: Vec<&str> = answer_refs[0]
                    .split(' ')
                    .filter(|t| !t.is_empty() && !hintkit::enrich::is_stopword(t))
                    .collect();
                let content = content.join(" ");
                if !content.is_empty() {
                    assert_eq!(
                        answerleakage_lexical(&hint.join(" "), &[&content], false).value,
                        answerleakage_lexical(&hint.join(" "), &[&content], true).value
                    );
                }
            }
        },
    );
}

// ---------------------------------------------------------------------------
// 7. End-to-end CLI pipeline
// ---------------------------------------------------------------------------

fn hint_stub() -> String {
    stub(Box::new(|method, url, body| {
        if method != "POST" || !url.ends_with("/chat/completions") {
            return (404, Vec::new());
        }
        let req: Value = serde_json::from_slice(body).unwrap_or_default();
        let user = req["messages"]
            .as_array()
            .and_then(|m| m.last())
            .map(|m| m["content"].to_string())
            .unwrap_or_default();
        let hints = if user.contains("South Africa") {
            [
                "He spent 27 years in prison before his release.",
                "He won the Nobel Peace Prize in 1993.",
                "He was a leader of the fight against apartheid.",
                "His first name is Nelson.",
                "He became president of South Africa after the first free election.",
            ]
        } else {
            [
                "This city is home to the Eiffel Tower.",
                "The Louvre gallery is located in this city.",
                "It lies on the river Seine.",
                "It is often called the City of Light.",
                "It is the largest city in France.",
            ]
        };
        let listing: Vec<String> = hints
            .iter()
            .enumerate()
            .map(|(i, h)| format!("{}. {h}", i + 1))
            .collect();
        (200, chat_reply(&listing.join("\n")))
    }))
}

#[test]
fn criterion_07_end_to_end_pipeline_reproduces_golden_csv() {
    criterion(
        7,
        "generate -> evaluate -> report reproduces the golden CSV",
        || {
            let start = Instant::now();
            let dir = tempfile::tempdir().unwrap();
            let home = dir.path();
            let chat_url = format!("{}/v1", hint_stub());
            let generated = home.join("generated.json");
            let evaluated = home.join("evaluated.json");

            let out = ok(hintkit(home)
                .env("HINTKIT_CHAT_URL", &chat_url)
                .args([
                    "generate",
                    "--mode",
                    "aware",
                    "--n-hints",
                    "5",
                    "--model",
                    "stub-llm",
                ])
                .arg(fixtures().join("two_instances.json"))
                .arg(&generated)
                .output()
                .unwrap());
            assert_eq!(out.trim(), "test: 10 hints generated");

            let out = ok(hintkit(home)
            .args(["--offline", "evaluate"])
            .arg(&generated)
            .arg(&evaluated)
            .arg("--metrics")
            .arg("relevance/rouge/rougeL,readability/traditional/flesch,familiarity/wordfreq/nostop,answerleakage/lexical/nostop")
            .arg("--freq-table")
            .arg(fixtures().join("freq.tsv"))
            .output()
            .unwrap());
            assert!(out.starts_with("40 computed, 0 skipped, 0 failed"), "{out}");

            let csv = ok(hintkit(home)
                .arg("report")
                .arg(&evaluated)
                .output()
                .unwrap());
            let golden =
                std::fs::read_to_string(fixtures().join("../golden/two_instances_report.csv"))
                    .unwrap();
            assert_eq!(csv, golden);

            // the rounded report agrees with a direct recomputation from the dataset
            let ds = import_json(&std::fs::read_to_string(&evaluated).unwrap()).unwrap();
            let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
            for inst in ds.subsets["test"].instances.values() {
                for h in &inst.hints {
                    assert_eq!(h.source, "model:stub-llm/answer-aware");
                    for (name, m) in &h.metrics {
                        let e = sums.entry(name.clone()).or_default();
                        e.0 += m.value;
                        e.1 += 1;
                    }
                }
            }
            let row: Vec<String> = sums
                .values()
                .map(|(s, n)| format!("{:.2}", s / *n as f64))
                .collect();
            assert_eq!(
                csv.lines().nth(1).unwrap(),
                format!("test,{}", row.join(","))
            );

            // a second evaluation without --overwrite computes nothing
            let again = ok(hintkit(home)
            .args(["--offline", "evaluate"])
            .arg(&evaluated)
            .arg(home.join("again.json"))
            .arg("--metrics")
            .arg("relevance/rouge/rougeL,readability/traditional/flesch,familiarity/wordfreq/nostop,answerleakage/lexical/nostop")
            .arg("--freq-table")
            .arg(fixtures().join("freq.tsv"))
            .output()
            .unwrap());
            assert!(again.starts_with("0 computed, 40 skipped"), "{again}");
            assert!(
                start.elapsed() < Duration::from_secs(10),
                "took {:?}",
                start.elapsed()
            );
        },
    );
}

// ---------------------------------------------------------------------------
// 8. Registry flow
// ---------------------------------------------------------------------------

fn registry_fixture() -> (Dataset, Vec<u8>) {
    let mut ds = Dataset::new("TriviaHG", "1.0");
    let sub = ds.subset_mut("training");
    sub.instances.insert(
        "q1".into(),
        Instance::new(Question::new("Who painted the Mona Lisa?"))
            .with_answers(["Leonardo da Vinci"])
            .with_hints(
                "human",
                [
                    "He was an Italian polymath.",
                    "He also sketched flying machines.",
                ],
            ),
    );
    sub.instances.insert(
        "q2".into(),
        Instance::new(Question::new("What is the largest planet?"))
            .with_answers(["Jupiter"])
            .with_hints("human", ["It is a gas giant.", "It has a Great Red Spot."]),
    );
    let bytes = export_archive(&ds).unwrap();
    (ds, bytes)
}

fn manifest(checksum: &str) -> String {
    json!({
        "schema_version": 1,
        "entries": [
            {
                "dataset_name": "TriviaHG",
                "description": "Hints for TriviaQA questions",
                "download_url": "datasets/triviahg.hds",
                "checksum": checksum,
                "subsets": [
                    {"name": "training", "finetuned": false, "uses_answer": true, "num_questions": 14645, "num_hints": 140973},
                    {"name": "validation", "finetuned": false, "uses_answer": true, "num_questions": 1000, "num_hints": 9638}
                ]
            },
            {
                "dataset_name": "KG-Hint",
                "description": "Knowledge-graph hints",
                "download_url": "datasets/kg-hint.hds",
                "checksum": "0".repeat(64),
                "subsets": [
                    {"name": "test", "finetuned": false, "uses_answer": false, "num_questions": 30, "num_hints": 307}
                ]
            }
        ]
    })
    .to_string()
}

fn registry_stub(manifest: String, archive: Vec<u8>) -> String {
    stub(Box::new(move |_, url, _| match url {
        "/manifest.json" => (200, manifest.clone().into_bytes()),
        "/datasets/triviahg.hds" => (200, archive.clone()),
        _ => (404, Vec::new()),
    }))
}

#[test]
fn criterion_08_registry_download_verifies_checksums() {
    criterion(
        8,
        "registry manifest parses, downloads verify, a flipped byte is rejected",
        || {
            let (ds, archive) = registry_fixture();
            let checksum = hex::encode(Sha256::digest(&archive));
            let base = registry_stub(manifest(&checksum), archive.clone());

            let parsed = RegistryManifest::parse(&manifest(&checksum)).unwrap();
            let training = &parsed.entry("TriviaHG").unwrap().subsets[0];
            assert_eq!(
                (training.num_questions, training.num_hints),
                (14_645, 140_973)
            );

            let cache = tempfile::tempdir().unwrap();
            let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new(false));
            let registry = Registry::new(
                format!("{base}/manifest.json"),
                cache.path(),
                transport.clone(),
            );
            assert_eq!(registry.available_datasets(true).unwrap().entries.len(), 2);
            assert_eq!(registry.download_dataset("TriviaHG").unwrap(), ds);

            let mut flipped = archive.clone();
            let mid = flipped.len() / 2;
            flipped[mid] ^= 0x01;
            let bad_base = registry_stub(manifest(&checksum), flipped);
            let cache2 = tempfile::tempdir().unwrap();
            let registry = Registry::new(
                format!("{bad_base}/manifest.json"),
                cache2.path(),
                transport,
            );
            match registry.download_dataset("TriviaHG") {
                Err(RegistryError::ChecksumMismatch {
                    expected, actual, ..
                }) => {
                    assert_eq!(expected, checksum);
                    assert_ne!(actual, checksum);
                }
                other => panic!("expected ChecksumMismatch, got {other:?}"),
            }
            assert!(!cache2.path().join("datasets").join("TriviaHG.hds").exists());

            let home = tempfile::tempdir().unwrap();
            let listing = ok(hintkit(home.path())
                .env("HINTKIT_REGISTRY_URL", format!("{base}/manifest.json"))
                .args(["dataset", "list"])
                .output()
                .unwrap());
            let row = listing
                .lines()
                .find(|l| l.starts_with("TriviaHG") && l.contains("training"))
                .unwrap();
            assert!(row.contains("14,645") && row.contains("140,973"), "{row}");
            let out = ok(hintkit(home.path())
                .env("HINTKIT_REGISTRY_URL", format!("{base}/manifest.json"))
                .args(["dataset", "download", "TriviaHG"])
                .output()
                .unwrap());
            assert!(out.contains("2 questions, 4 hints"), "{out}");
        },
    );
}

// ---------------------------------------------------------------------------
// 9. Determinism under mocks
// ---------------------------------------------------------------------------

/// Answers every backend request as a pure function of the request.
struct DeterministicTransport;

fn digest_u64(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

impl Transport for DeterministicTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, ClientError> {
        let body: Value = req
            .body
            .as_deref()
            .map(|b| serde_json::from_slice(b).unwrap())
            .unwrap_or(Value::Null);
        let url = req.url.as_str();
        let reply = if url.ends_with("/chat/completions") {
            let user = body["messages"]
                .as_array()
                .and_then(|m| m.last())
                .map(|m| m["content"].clone())
                .unwrap_or_default();
            let user = user.as_str().unwrap_or_default().to_string();
            let content = if user.contains("List ") {
                "1. Paris\n2. Lyon\n3. Nelson Mandela\n4. Berlin".to_string()
            } else if user.contains("Candidate answer") {
                if digest_u64(&user).is_multiple_of(3) {
                    "no"
                } else {
                    "yes"
                }
                .to_string()
            } else if user.contains("Readability level") {
                ["Beginner", "Intermediate", "Advanced"][(digest_u64(&user) % 3) as usize]
                    .to_string()
            } else {
                let h = digest_u64(&user);
                format!(
                    "1. What is {}?\n2. Where is it?\n3. Who was it {}?",
                    h % 97,
                    h % 13
                )
            };
            chat_reply(&content)
        } else if url.ends_with("/embeddings") {
            let data: Vec<Value> = body["input"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
                .map(|(i, t)| json!({"index": i, "embedding": hashed_vector(t.as_str().unwrap(), 16)}))
                .collect();
            json!({"data": data}).to_string().into_bytes()
        } else if url.contains("/per-article/") {
            let views = digest_u64(url) % 2_000_000;
            json!({"items": [{"views": views / 2}, {"views": views - views / 2}]})
                .to_string()
                .into_bytes()
        } else if url.ends_with("/score") {
            let scores: Vec<f64> = body["texts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| (digest_u64(t.as_str().unwrap()) % 1000) as f64 / 999.0)
                .collect();
            json!({"scores": scores}).to_string().into_bytes()
        } else {
            return Ok(HttpResponse::status(404));
        };
        Ok(HttpResponse::ok(reply))
    }
}

fn mock_backends() -> Backends {
    let t: Arc<dyn Transport> = Arc::new(DeterministicTransport);
    let ep = |url: &str| Endpoint::new(url, t.clone()).with_retry(RetryPolicy::no_retry());
    let chat: Arc<dyn ChatClient> = Arc::new(OpenAiChat::new(ep("http://mock/v1"), "judge"));
    let mut b = Backends {
        chat: Some(chat),
        embed: Some(Arc::new(
            OpenAiEmbed::new(ep("http://mock/v1"), "embedder").with_batch_size(7),
        )),
        pageviews: Some(Arc::new(
            WikimediaPageviews::new(ep("http://mock/metrics/pageviews/per-article"))
                .with_end_date(chrono_date()),
        )),
        ..Backends::default()
    };
    for method in ["convergence/specificity/default", "readability/nn/default"] {
        b.scorers.insert(
            method.into(),
            Arc::new(RemoteScorer::new(ep("http://mock/score"))),
        );
    }
    b
}

fn chrono_date() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2024, 12, 31).unwrap()
}

fn mixed_fixture() -> Dataset {
    let text = std::fs::read_to_string(fixtures().join("two_instances.json")).unwrap();
    let mut ds = import_json(&text).unwrap();
    let hints = [
        vec![
            "He spent 27 years in prison on Robben Island.",
            "He won the Nobel Peace Prize in 1993.",
            "His name starts with Nelson.",
        ],
        vec![
            "This city is home to the Eiffel Tower.",
            "The Louvre is located here.",
            "It lies on the Seine in France.",
        ],
    ];
    for (inst, hs) in ds.subsets["test"].instances.values_mut().zip(hints) {
        inst.hints
            .extend(hs.into_iter().map(|h| Hint::new(h, "human")));
    }
    ds
}

#[test]
fn criterion_09_evaluation_is_deterministic_under_mocks() {
    criterion(
        9,
        "two full evaluations with deterministic mock transports give identical bytes",
        || {
            let config = MetricConfig::parse_list(
            "relevance/rouge/rouge1,relevance/rouge/rouge2,relevance/rouge/rougeL,relevance/contextual,relevance/llm,\
             readability/traditional/flesch@hint+question,readability/traditional/smog,readability/llm,readability/nn,\
             convergence/llm,convergence/specificity,familiarity/wordfreq/withstop@hint+answer,familiarity/wikipedia,\
             answerleakage/lexical/nostop,answerleakage/contextual",
        )
        .unwrap();
            let freq: FrequencyTable = [("city", 0.7), ("prison", 0.5), ("the", 1.0)]
                .into_iter()
                .collect();
            let mut outputs = Vec::new();
            for workers in [1, 8] {
                let mut cfg = config.clone();
                cfg.workers = workers;
                let mut backends = mock_backends();
                backends.frequency = Some(Arc::new(freq.clone()));
                let mut ds = mixed_fixture();
                let summary = evaluate_dataset(&mut ds, &cfg, &backends, &()).unwrap();
                assert_eq!(summary.failed, 0, "{:?}", summary.methods);
                outputs.push(export_json(&ds).unwrap());
            }
            assert_eq!(outputs[0], outputs[1]);
            let ds = import_json(&outputs[0]).unwrap();
            let hint = &ds.subsets["test"].instances["id_1"].hints[0];
            assert_eq!(hint.metrics.len(), 15);
        },
    );
}

// ---------------------------------------------------------------------------
// 10. Scale
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_ten_thousand_hints_within_a_minute() {
    criterion(
        10,
        "10,000 synthetic hints through every offline method in under 60 s",
        || {
            let mut rng = StdRng::seed_from_u64(10);
            let mut ds = Dataset::new("scale", "1");
            let sub = ds.subset_mut("synthetic");
            for q in 0..1000 {
                let question = format!("{}?", random_tokens(&mut rng, 12).join(" "));
                let question = if question.len() > 1 {
                    question
                } else {
                    "Why?".into()
                };
                let mut inst =
                    Instance::new(Question::new(question)).with_answers([VOCAB[q % VOCAB.len()]]);
                for _ in 0..10 {
                    let mut t = random_tokens(&mut rng, 25);
                    t.push("city".into());
                    inst.hints
                        .push(Hint::new(format!("{}.", t.join(" ")), "synthetic"));
                }
                sub.instances.insert(format!("q{q:04}"), inst);
            }
            assert_eq!(ds.num_hints(), 10_000);
            let vectors = VectorTable::from_rows(VOCAB.iter().map(|w| {
                (
                    w.to_string(),
                    (0..50)
                        .map(|_| rng.gen_range(-1.0f32..1.0))
                        .collect::<Vec<_>>(),
                )
            }))
            .unwrap();
            let mut backends = Backends {
                offline: true,
                vectors: Some(Arc::new(vectors)),
                frequency: Some(Arc::new(
                    VOCAB.iter().map(|w| (*w, rng.gen::<f64>())).collect(),
                )),
                ..Backends::default()
            };
            backends.linear.insert(
                "default".into(),
                Arc::new(LinearScorer {
                    feature_names: FEATURES.iter().map(|f| f.to_string()).collect(),
                    weights: vec![0.1, 1.0, 2.0, 0.2, -1.0, -0.5],
                    bias: -1.0,
                    class_thresholds: [0.5, 1.5],
                }),
            );
            let methods = [
                "relevance/rouge/rouge1",
                "relevance/rouge/rouge2",
                "relevance/rouge/rougeL",
                "relevance/noncontextual",
                "readability/traditional/flesch",
                "readability/traditional/gunning_fog",
                "readability/traditional/coleman_liau",
                "readability/traditional/smog",
                "readability/traditional/ari",
                "readability/ml",
                "familiarity/wordfreq/nostop",
                "familiarity/wordfreq/withstop",
                "answerleakage/lexical/nostop",
                "answerleakage/lexical/withstop",
            ];
            let config = MetricConfig::new(
                methods
                    .iter()
                    .map(|m| MethodSpec::parse(m).unwrap())
                    .collect(),
            );
            let start = Instant::now();
            let summary = evaluate_dataset(&mut ds, &config, &backends, &()).unwrap();
            let elapsed = start.elapsed();
            assert_eq!(summary.computed, 10_000 * methods.len());
            assert_eq!(summary.failed, 0);
            assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
            let _ = writeln!(
                std::io::stderr(),
                "  scored {} results in {elapsed:.2?}",
                summary.computed
            );
        },
    );
}
