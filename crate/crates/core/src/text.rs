//! Tokenizers and n-gram helpers shared by the corpus, intent and metric code.

use std::collections::HashSet;

use sha2::{Digest, Sha256};

const DEFAULT_STOPWORDS: &str = include_str!("../config/stopwords.txt");

/// Whitespace-delimited token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercased maximal alphanumeric runs. Punctuation only separates tokens.
pub fn metric_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Lowercased whitespace tokens with punctuation trimmed from both ends;
/// tokens that are all punctuation vanish.
pub fn boundary_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|tok| tok.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Unique n-grams of a token sequence. Empty when `tokens.len() < n`.
pub fn ngram_set(tokens: &[String], n: usize) -> HashSet<&[String]> {
    if n == 0 || tokens.len() < n {
        return HashSet::new();
    }
    tokens.windows(n).collect()
}

#[derive(Debug, Clone)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn from_lines(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn empty() -> Self {
        StopWords(HashSet::new())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Boundary tokens of `text` with stop words removed.
    pub fn content_tokens(&self, text: &str) -> Vec<String> {
        boundary_tokens(text)
            .into_iter()
            .filter(|t| !self.contains(t))
            .collect()
    }
}

impl Default for StopWords {
    fn default() -> Self {
        StopWords::from_lines(DEFAULT_STOPWORDS)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collapse every whitespace run into one space and trim.
pub fn squash_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
