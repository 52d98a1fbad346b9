//! Tokenization and sentence splitting shared by the index, the metrics and
//! the baselines.

use serde::{Deserialize, Serialize};

/// Tokenizer configuration recorded in every persisted index header.
///
/// The only scheme is Unicode-aware: lowercase, then split on runs of
/// non-alphanumeric characters, dropping empty tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub scheme: String,
    pub lowercase: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            scheme: "unicode-alnum".to_string(),
            lowercase: true,
        }
    }
}

impl TokenizerConfig {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let split = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty());
        if self.lowercase {
            split.map(str::to_lowercase).collect()
        } else {
            split.map(str::to_string).collect()
        }
    }
}

/// Tokenize with the default configuration.
pub fn tokenize(text: &str) -> Vec<String> {
    TokenizerConfig::default().tokenize(text)
}

/// Whitespace tokens, used for truncation budgets and word caps.
pub fn whitespace_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Split text into sentences on `.`, `!` or `?` followed by whitespace or the
/// end of the text. Terminators stay with their sentence; no abbreviation
/// handling.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                let end = i + c.len_utf8();
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence);
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// First sentence of a text; the whole (trimmed) text when it has no
/// terminator.
pub fn first_sentence(text: &str) -> &str {
    split_sentences(text).into_iter().next().unwrap_or("")
}

/// First non-empty line of a text, trimmed.
pub fn first_line(text: &str) -> &str {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
}

/// Keep at most `max_words` whitespace words.
pub fn cap_words(text: &str, max_words: usize) -> String {
    text.split_whitespace()
        .take(max_words)
        .collect::<Vec<_>>()
        .join(" ")
}
