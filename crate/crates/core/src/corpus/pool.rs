use serde::{Deserialize, Serialize};

use super::markup::TARGET_MARK;
use super::{CitationInstance, ExamplePool, ExampleSentence};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::text::word_count;

/// Splits a paragraph into sentences.
pub trait Segmenter: Sync {
    fn segment(&self, text: &str) -> Result<Vec<String>>;
}

/// Splits after `.`, `!` or `?` when followed by whitespace and a capital
/// letter or an opening bracket, except after common abbreviations.
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: Vec<&'static str>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        RuleSegmenter {
            abbreviations: vec![
                "e.g.", "i.e.", "al.", "cf.", "vs.", "fig.", "eq.", "sec.", "etc.", "approx.",
                "no.", "dr.", "mr.", "ms.",
            ],
        }
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Result<Vec<String>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("cannot segment empty text".into()));
        }
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut sentences = Vec::new();
        let mut start = 0;
        for (k, &(pos, ch)) in chars.iter().enumerate() {
            if !matches!(ch, '.' | '!' | '?') {
                continue;
            }
            let end = pos + ch.len_utf8();
            // Need whitespace, then a sentence opener.
            let mut j = k + 1;
            if j >= chars.len() || !chars[j].1.is_whitespace() {
                continue;
            }
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j >= chars.len() {
                continue;
            }
            let next = chars[j].1;
            if !(next.is_uppercase() || matches!(next, '[' | '(' | '"' | '\u{201c}')) {
                continue;
            }
            if ch == '.' && self.ends_with_abbreviation(&text[start..end]) {
                continue;
            }
            let s = text[start..end].trim();
            if !s.is_empty() {
                sentences.push(s.to_string());
            }
            start = chars[j].0;
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            sentences.push(tail.to_string());
        }
        Ok(sentences)
    }
}

impl RuleSegmenter {
    fn ends_with_abbreviation(&self, sentence: &str) -> bool {
        let last = sentence
            .split_whitespace()
            .last()
            .unwrap_or("")
            .trim_start_matches(['(', '['])
            .to_lowercase();
        self.abbreviations.iter().any(|a| last == *a)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub sentences: usize,
    pub cited_papers: usize,
    pub skipped_paragraphs: usize,
    pub removed_short_sentences: usize,
}

/// Pool of citing sentences keyed by cited paper. A sentence enters the pool
/// for a cited paper when it carries that paper's mark and has at least
/// `min_sentence_words` words. Only surviving instances contribute, so a
/// removed paragraph takes its sentences with it.
pub fn build_example_pool(
    instances: &[CitationInstance],
    segmenter: &dyn Segmenter,
    min_sentence_words: usize,
    exec: Exec,
) -> (ExamplePool, PoolStats) {
    struct Harvest {
        skipped: usize,
        short: usize,
        found: Vec<(String, ExampleSentence)>,
    }

    let harvested = exec.map(instances, |inst| {
        let mut h = Harvest {
            skipped: 0,
            short: 0,
            found: Vec::new(),
        };
        for (idx, cite) in inst.citations.iter().enumerate() {
            let normalized = inst.gold_reference_for(idx);
            let sentences = match segmenter.segment(&normalized) {
                Ok(s) => s,
                Err(_) => {
                    h.skipped += 1;
                    continue;
                }
            };
            for sentence in sentences.into_iter().filter(|s| s.contains(TARGET_MARK)) {
                if word_count(&sentence) < min_sentence_words {
                    h.short += 1;
                    continue;
                }
                h.found.push((
                    cite.cited.paper_id.clone(),
                    ExampleSentence {
                        example_id: String::new(),
                        sentence,
                        source_paragraph: normalized.clone(),
                        cited_paper_id: cite.cited.paper_id.clone(),
                        citing_paper_id: inst.citing.paper_id.clone(),
                        source_instance_id: inst.instance_id.clone(),
                        mark: cite.mark.clone(),
                    },
                ));
            }
        }
        h
    });

    let mut pool = ExamplePool::default();
    let mut stats = PoolStats::default();
    for h in harvested {
        stats.skipped_paragraphs += h.skipped;
        stats.removed_short_sentences += h.short;
        for (cited, mut ex) in h.found {
            let entry = pool.by_cited_paper.entry(cited.clone()).or_default();
            ex.example_id = format!("{cited}#{}", entry.len());
            entry.push(ex);
        }
    }
    stats.sentences = pool.sentence_count();
    stats.cited_papers = pool.cited_paper_count();
    (pool, stats)
}
