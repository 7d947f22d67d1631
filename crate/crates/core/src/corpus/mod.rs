//! Citation-paragraph corpus: ingestion, cleanup, example-sentence pool and
//! example selection.

mod ingest;
mod markup;
mod pool;
mod select;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ingest::{ingest_corpus, ingest_str, IngestConfig, IngestStats, RawRecord};
pub use markup::{normalize_citation_marks, OTHER_MARK, TARGET_MARK};
pub use pool::{build_example_pool, PoolStats, RuleSegmenter, Segmenter};
pub use select::{
    select_example, LexicalJaccard, SelectedExample, SelectionProvenance, SimilarityProvider,
};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: Option<i32>,
    #[serde(default)]
    pub venue_metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedRef {
    pub cited: PaperRecord,
    /// Citation element exactly as it appears in the paragraph markup.
    pub mark: String,
    /// Byte offset of the first occurrence of `mark` in the markup.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationInstance {
    pub instance_id: String,
    pub citing: PaperRecord,
    pub paragraph_text: String,
    pub paragraph_markup: String,
    pub citations: Vec<CitedRef>,
    pub section_title: String,
    /// Categorical intent label shipped with the corpus, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical_intent: Option<String>,
}

impl CitationInstance {
    pub fn is_single_citation(&self) -> bool {
        self.citations.len() == 1
    }

    /// The gold paragraph with the first cited paper marked `[REF#1]` and
    /// every other citation marked `[OTH]`.
    pub fn gold_reference(&self) -> String {
        self.gold_reference_for(0)
    }

    /// Gold paragraph normalized around the citation at `target`.
    pub fn gold_reference_for(&self, target: usize) -> String {
        let marks: Vec<&str> = self.citations.iter().map(|c| c.mark.as_str()).collect();
        normalize_citation_marks(&self.paragraph_markup, &marks, target)
    }

    pub fn cited(&self) -> Option<&PaperRecord> {
        self.citations.first().map(|c| &c.cited)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSentence {
    /// Cited paper id + "#" + ordinal within that paper's pool entry.
    pub example_id: String,
    pub sentence: String,
    pub source_paragraph: String,
    pub cited_paper_id: String,
    pub citing_paper_id: String,
    pub source_instance_id: String,
    pub mark: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePool {
    pub by_cited_paper: BTreeMap<String, Vec<ExampleSentence>>,
}

impl ExamplePool {
    pub fn get(&self, cited_paper_id: &str) -> &[ExampleSentence] {
        self.by_cited_paper
            .get(cited_paper_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn sentence_count(&self) -> usize {
        self.by_cited_paper.values().map(Vec::len).sum()
    }

    pub fn cited_paper_count(&self) -> usize {
        self.by_cited_paper.len()
    }
}

/// Everything `ingest` produces, as written to `corpus.bundle.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusBundle {
    pub schema_version: u32,
    pub instances: Vec<CitationInstance>,
    pub pool: ExamplePool,
    pub stats: IngestStats,
    pub pool_stats: PoolStats,
}

impl CorpusBundle {
    pub fn instance(&self, id: &str) -> Option<&CitationInstance> {
        self.instances.iter().find(|i| i.instance_id == id)
    }
}

/// Instances citing exactly one paper, in input order.
pub fn select_single_citation(instances: &[CitationInstance]) -> Vec<CitationInstance> {
    instances
        .iter()
        .filter(|i| i.is_single_citation())
        .cloned()
        .collect()
}


#[cfg(test)]
mod tests {
    use super::testutil::instance;
    use super::*;

    #[test]
    fn single_citation_filter() {
        let counts = [1usize, 2, 1, 18];
        let cited: Vec<String> = (0..18).map(|i| format!("P{i}")).collect();
        let refs: Vec<&str> = cited.iter().map(String::as_str).collect();
        let instances: Vec<_> = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| instance(&format!("i{i}"), "C", &refs[..n]))
            .collect();
        let single = select_single_citation(&instances);
        assert_eq!(single.len(), 2);
        assert_eq!(single[0].instance_id, "i0");
        assert_eq!(single[1].instance_id, "i2");
        assert!(select_single_citation(&[]).is_empty());
    }

    #[test]
    fn gold_reference_marks() {
        let inst = instance("x", "C", &["P1", "P2"]);
        assert_eq!(inst.gold_reference(), "We build on prior work [REF#1] [OTH].");
        assert_eq!(inst.gold_reference_for(1), "We build on prior work [OTH] [REF#1].");
    }
}
