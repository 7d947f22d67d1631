use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::TARGET_MARK;
use crate::text::{metric_tokens, ngram_set, word_count};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetrics {
    pub ng1: f64,
    pub ng2: f64,
    pub ng3: f64,
    pub word_count: usize,
    pub paragraph_count: usize,
    pub citation_mark_used: bool,
}

impl SurfaceMetrics {
    /// `source` is the full prompt input the output was produced from.
    pub fn compute(source: &str, output: &str) -> Self {
        let src = metric_tokens(source);
        let out = metric_tokens(output);
        SurfaceMetrics {
            ng1: overlap_tokens(1, &src, &out),
            ng2: overlap_tokens(2, &src, &out),
            ng3: overlap_tokens(3, &src, &out),
            word_count: word_count(output),
            paragraph_count: paragraph_count(output),
            citation_mark_used: citation_mark_usage(output, TARGET_MARK),
        }
    }
}

/// Share of the output's unique n-grams that also occur in the source.
pub fn ngram_overlap(n: usize, source_text: &str, output_text: &str) -> f64 {
    overlap_tokens(n, &metric_tokens(source_text), &metric_tokens(output_text))
}

fn overlap_tokens(n: usize, source: &[String], output: &[String]) -> f64 {
    let out = ngram_set(output, n);
    if out.is_empty() {
        return 0.0;
    }
    let src: HashSet<&[String]> = ngram_set(source, n);
    out.iter().filter(|g| src.contains(*g)).count() as f64 / out.len() as f64
}

/// Blocks separated by at least one blank line; 0 only for blank text.
pub fn paragraph_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_block = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            in_block = false;
        } else if !in_block {
            in_block = true;
            count += 1;
        }
    }
    count
}

pub fn citation_mark_usage(text: &str, mark: &str) -> bool {
    text.contains(mark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_enumerated_bigrams() {
        // output bigrams {a b, b x}; only "a b" is in the source
        assert_eq!(ngram_overlap(2, "a b c d e", "a b x"), 0.5);
        assert_eq!(ngram_overlap(1, "a b c d e", "a b x"), 2.0 / 3.0);
        assert_eq!(ngram_overlap(3, "a b c d e", "a b"), 0.0);
    }

    #[test]
    fn self_copy_and_disjoint() {
        let s = "We follow the parser of [REF#1] closely.";
        for n in 1..=3 {
            assert_eq!(ngram_overlap(n, s, s), 1.0);
            assert_eq!(ngram_overlap(n, s, "zzz yyy xxx www"), 0.0);
        }
    }

    #[test]
    fn paragraphs() {
        assert_eq!(paragraph_count("p1\n\np2"), 2);
        assert_eq!(paragraph_count("p1\np1 cont\n\n\n  \np2\n\np3\n"), 3);
        assert_eq!(paragraph_count("single"), 1);
        assert_eq!(paragraph_count(" \n "), 0);
    }

    #[test]
    fn mark_is_verbatim() {
        assert!(citation_mark_usage("as in [REF#1].", "[REF#1]"));
        assert!(!citation_mark_usage("as in [REF #1].", "[REF#1]"));
        assert!(!citation_mark_usage("as in [ref#1].", "[REF#1]"));
    }

    const V: &[&str] = &["a", "b", "c", "d", "e", "f", "g"];

    proptest! {
        // Extending a source-contained tail of the output with the text that
        // follows it in the source only adds source n-grams.
        #[test]
        fn appending_source_continuation_never_decreases(
            src in prop::collection::vec(prop::sample::select(V), 4..30),
            noise in prop::collection::vec(prop::sample::select(V), 0..10),
            i in 0usize..30, len in 0usize..30, extra in 1usize..30,
        ) {
            let i = i % src.len();
            for n in 1..=3usize {
                let j = (i + len.max(n - 1)).min(src.len());
                if j - i < n - 1 { continue; }
                let k = (j + extra).min(src.len());
                let source = src.join(" ");
                let mut out: Vec<&str> = noise.clone();
                out.extend(&src[i..j]);
                let before = ngram_overlap(n, &source, &out.join(" "));
                out.extend(&src[j..k]);
                let after = ngram_overlap(n, &source, &out.join(" "));
                prop_assert!(after >= before - 1e-12, "n={n} {before} -> {after}");
            }
        }

        #[test]
        fn ratio_bounded(src in "[a-e ]{0,40}", out in "[a-e ]{0,40}") {
            for n in 1..=3 {
                let r = ngram_overlap(n, &src, &out);
                prop_assert!((0.0..=1.0).contains(&r));
            }
        }
    }
}
