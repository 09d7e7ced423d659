use serde::{Deserialize, Serialize};

/// Counts feeding the readability formulas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    /// Lowercased word tokens.
    pub tokens: Vec<String>,
    pub sentences: usize,
    pub syllables_per_token: Vec<usize>,
    /// Alphabetic characters inside tokens.
    pub letters: usize,
    pub words: usize,
}

impl TextStats {
    pub fn syllables(&self) -> usize {
        self.syllables_per_token.iter().sum()
    }

    /// Tokens of three or more syllables.
    pub fn complex_words(&self) -> usize {
        self.syllables_per_token.iter().filter(|&&s| s >= 3).count()
    }
}

/// A word token located in its source text. Offsets count chars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpan<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Word tokens in original case: maximal runs of letters and digits, with
/// apostrophes kept only between two alphanumerics ("don't", "O'Neill").
pub fn word_spans(text: &str) -> Vec<WordSpan<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            let c = chars[i].1;
            let joins = is_apostrophe(c)
                && i > start
                && chars.get(i + 1).is_some_and(|(_, n)| n.is_alphanumeric());
            if c.is_alphanumeric() || joins {
                i += 1;
            } else {
                break;
            }
        }
        let byte_start = chars[start].0;
        let byte_end = chars.get(i).map_or(text.len(), |(b, _)| *b);
        spans.push(WordSpan {
            text: &text[byte_start..byte_end],
            start,
            end: i,
        });
    }
    spans
}

/// Lowercased word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    word_spans(text)
        .into_iter()
        .map(|w| w.text.to_lowercase())
        .collect()
}

/// Number of sentences: segments separated by runs of `.`, `!` or `?`
/// followed by whitespace or the end of the text, counting only segments
/// with at least one letter or digit. Any text with a non-space character
/// has at least one sentence.
pub fn count_sentences(text: &str) -> usize {
    if text.trim().is_empty() {
        return 0;
    }
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut has_content = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i;
            while j < chars.len() && matches!(chars[j], '.' | '!' | '?') {
                j += 1;
            }
            if j == chars.len() || chars[j].is_whitespace() {
                if has_content {
                    count += 1;
                }
                has_content = false;
            }
            i = j;
            continue;
        }
        if c.is_alphanumeric() {
            has_content = true;
        }
        i += 1;
    }
    if has_content {
        count += 1;
    }
    count.max(1)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Heuristic syllable count: vowel groups (a, e, i, o, u, y), minus one for
/// a silent final "e" (one following a consonant, as in "make" but not
/// "committee"), except after consonant + "l" ("table"); never below 1.
pub fn count_syllables(token: &str) -> usize {
    let word: Vec<char> = token
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect();
    let mut groups: usize = 0;
    let mut prev_vowel = false;
    for &c in &word {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = word.len();
    if n >= 2 && word[n - 1] == 'e' && !is_vowel(word[n - 2]) {
        let consonant_le =
            n >= 3 && word[n - 2] == 'l' && word[n - 3].is_alphabetic() && !is_vowel(word[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

pub fn analyze_text(text: &str) -> TextStats {
    let tokens = tokenize(text);
    let syllables_per_token: Vec<usize> = tokens.iter().map(|t| count_syllables(t)).collect();
    let letters = tokens
        .iter()
        .map(|t| t.chars().filter(|c| c.is_alphabetic()).count())
        .sum();
    TextStats {
        words: tokens.len(),
        sentences: count_sentences(text),
        syllables_per_token,
        letters,
        tokens,
    }
}
