use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;

use super::pool::{build_example_pool, RuleSegmenter};
use super::{CitationInstance, CitedRef, CorpusBundle, PaperRecord, BUNDLE_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::text::{squash_whitespace, word_count};

const DEFAULT_TITLES: &str = include_str!("../../config/related_work_titles.txt");

/// One line of the raw corpus file. Field names follow the released dataset
/// columns; list-valued columns are native lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub acl_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub section_title: String,
    pub paragraph: String,
    pub paragraph_xml: String,
    pub cited_paper_marks: Vec<String>,
    pub cited_paper_titles: Vec<String>,
    pub cited_papers_acl_ids: Vec<String>,
    pub cited_papers_abstracts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cited_papers_years: Vec<Option<i32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical_intent: Option<String>,
    /// Remaining citing-paper metadata (publisher, booktitle, author, doi, url, ...).
    #[serde(flatten)]
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub section_titles: Vec<String>,
    pub min_paragraph_words: usize,
    pub min_sentence_words: usize,
    /// Drop records whose language tag is present and not in `languages`.
    pub language_filter: bool,
    pub languages: Vec<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            section_titles: DEFAULT_TITLES
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
            min_paragraph_words: 40,
            min_sentence_words: 10,
            language_filter: true,
            languages: vec!["en".into(), "eng".into(), "english".into()],
        }
    }
}

impl IngestConfig {
    pub fn with_titles_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        self.section_titles = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Ok(self)
    }

    fn title_matches(&self, title: &str) -> bool {
        let t = title.trim().to_lowercase();
        self.section_titles.iter().any(|s| s.trim().to_lowercase() == t)
    }

    fn language_ok(&self, tag: Option<&str>) -> bool {
        match tag {
            Some(tag) if self.language_filter => {
                let tag = tag.trim().to_lowercase();
                self.languages.iter().any(|l| l.to_lowercase() == tag)
            }
            _ => true,
        }
    }
}

/// Per-rule removal counts. `raw_records == kept + removed_total()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub raw_records: usize,
    pub kept: usize,
    pub removed_malformed: usize,
    pub removed_corrupted: usize,
    pub removed_non_english: usize,
    pub removed_section_title: usize,
    pub removed_short_paragraph: usize,
    pub removed_duplicate: usize,
}

impl IngestStats {
    pub fn removed_total(&self) -> usize {
        self.removed_malformed
            + self.removed_corrupted
            + self.removed_non_english
            + self.removed_section_title
            + self.removed_short_paragraph
            + self.removed_duplicate
    }
}

#[derive(Debug)]
enum Rejection {
    Malformed(String),
    Corrupted(String),
    NonEnglish,
    SectionTitle,
    ShortParagraph,
}

pub fn ingest_corpus(path: &Path, config: &IngestConfig) -> Result<CorpusBundle> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_str(&text, config, Exec::default())
}

/// Ingest line-delimited JSON records. Records are validated in parallel and
/// merged in input order, so the bundle only depends on the input bytes.
pub fn ingest_str(text: &str, config: &IngestConfig, exec: Exec) -> Result<CorpusBundle> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();

    let checked = exec.map(&lines, |(line_no, line)| validate_line(*line_no, line, config));

    let mut stats = IngestStats {
        raw_records: lines.len(),
        ..IngestStats::default()
    };
    let mut instances = Vec::new();
    let mut first_owner: HashMap<(String, String), String> = HashMap::new();
    let mut seen_paragraphs: HashSet<(String, String)> = HashSet::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for ((line_no, _), result) in lines.iter().zip(checked) {
        let inst = match result {
            Ok(inst) => inst,
            Err(rejection) => {
                match rejection {
                    Rejection::Malformed(why) => {
                        warn!(line = line_no, "skipping malformed record: {why}");
                        stats.removed_malformed += 1;
                    }
                    Rejection::Corrupted(why) => {
                        warn!(line = line_no, "skipping corrupted record: {why}");
                        stats.removed_corrupted += 1;
                    }
                    Rejection::NonEnglish => stats.removed_non_english += 1,
                    Rejection::SectionTitle => stats.removed_section_title += 1,
                    Rejection::ShortParagraph => stats.removed_short_paragraph += 1,
                }
                continue;
            }
        };

        // Same title and abstract under another id is the same paper
        // published twice; identical paragraphs are exact repeats.
        let key = (
            squash_whitespace(&inst.citing.title).to_lowercase(),
            squash_whitespace(&inst.citing.abstract_text).to_lowercase(),
        );
        let owner = first_owner
            .entry(key)
            .or_insert_with(|| inst.citing.paper_id.clone());
        let repeat = !seen_paragraphs.insert((
            inst.citing.paper_id.clone(),
            squash_whitespace(&inst.paragraph_text),
        ));
        if *owner != inst.citing.paper_id || repeat || seen_ids.contains(&inst.instance_id) {
            stats.removed_duplicate += 1;
            continue;
        }
        seen_ids.insert(inst.instance_id.clone());
        instances.push(inst);
    }

    stats.kept = instances.len();
    if instances.is_empty() {
        return Err(Error::EmptyCorpus {
            raw: stats.raw_records,
        });
    }

    let segmenter = RuleSegmenter::default();
    let (pool, pool_stats) =
        build_example_pool(&instances, &segmenter, config.min_sentence_words, exec);

    Ok(CorpusBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        instances,
        pool,
        stats,
        pool_stats,
    })
}

fn validate_line(
    line_no: usize,
    line: &str,
    config: &IngestConfig,
) -> std::result::Result<CitationInstance, Rejection> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| Rejection::Malformed(e.to_string()))?;
    let inst = build_instance(line_no, raw.clone())?;
    if !config.language_ok(raw.language.as_deref()) {
        return Err(Rejection::NonEnglish);
    }
    if !config.title_matches(&raw.section_title) {
        return Err(Rejection::SectionTitle);
    }
    if word_count(&inst.paragraph_text) < config.min_paragraph_words {
        return Err(Rejection::ShortParagraph);
    }
    Ok(inst)
}

fn build_instance(
    line_no: usize,
    raw: RawRecord,
) -> std::result::Result<CitationInstance, Rejection> {
    let corrupted = |why: &str| Err(Rejection::Corrupted(why.to_string()));

    if raw.acl_id.trim().is_empty() {
        return corrupted("empty acl_id");
    }
    if raw.abstract_text.trim().is_empty() {
        return corrupted("empty citing abstract");
    }
    if raw.title.trim().is_empty() {
        return corrupted("empty citing title");
    }
    if raw.paragraph.trim().is_empty() || raw.paragraph_xml.trim().is_empty() {
        return corrupted("empty paragraph");
    }
    let n = raw.cited_paper_marks.len();
    if n == 0 {
        return corrupted("no citation marks");
    }
    if raw.cited_paper_titles.len() != n
        || raw.cited_papers_acl_ids.len() != n
        || raw.cited_papers_abstracts.len() != n
        || (!raw.cited_papers_years.is_empty() && raw.cited_papers_years.len() != n)
    {
        return corrupted("cited-paper lists differ in length");
    }

    let mut citations = Vec::with_capacity(n);
    for i in 0..n {
        let mark = &raw.cited_paper_marks[i];
        if mark.is_empty() {
            return corrupted("empty citation mark");
        }
        let Some(position) = raw.paragraph_xml.find(mark.as_str()) else {
            return corrupted("citation mark missing from paragraph markup");
        };
        if raw.cited_papers_abstracts[i].trim().is_empty() {
            return corrupted("empty cited abstract");
        }
        if raw.cited_papers_acl_ids[i].trim().is_empty() {
            return corrupted("empty cited paper id");
        }
        citations.push(CitedRef {
            cited: PaperRecord {
                paper_id: raw.cited_papers_acl_ids[i].trim().to_string(),
                title: raw.cited_paper_titles[i].trim().to_string(),
                abstract_text: raw.cited_papers_abstracts[i].trim().to_string(),
                year: raw.cited_papers_years.get(i).copied().flatten(),
                venue_metadata: BTreeMap::new(),
            },
            mark: mark.clone(),
            position,
        });
    }

    let venue_metadata = raw
        .metadata
        .iter()
        .filter_map(|(k, v)| match v {
            Value::Null => None,
            Value::String(s) => Some((k.clone(), s.clone())),
            other => Some((k.clone(), other.to_string())),
        })
        .collect();

    let categorical_intent = raw
        .categorical_intent
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());

    Ok(CitationInstance {
        instance_id: raw
            .instance_id
            .filter(|s| !s.trim().is_empty())
            .unwrap_or_else(|| format!("{}-L{line_no}", raw.acl_id.trim())),
        citing: PaperRecord {
            paper_id: raw.acl_id.trim().to_string(),
            title: raw.title.trim().to_string(),
            abstract_text: raw.abstract_text.trim().to_string(),
            year: raw.year,
            venue_metadata,
        },
        paragraph_text: raw.paragraph.trim().to_string(),
        paragraph_markup: raw.paragraph_xml,
        citations,
        section_title: raw.section_title,
        categorical_intent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    fn record(id: &str, section: &str, paragraph_words: usize) -> Value {
        let para = format!("{} <cite>X</cite>", words(paragraph_words.saturating_sub(1)));
        json!({
            "acl_id": id,
            "title": format!("Paper {id}"),
            "abstract": format!("Abstract of {id}."),
            "year": 2021,
            "section_title": section,
            "paragraph": para.replace("<cite>X</cite>", "X"),
            "paragraph_xml": para,
            "cited_paper_marks": ["<cite>X</cite>"],
            "cited_paper_titles": ["Cited"],
            "cited_papers_acl_ids": ["C1"],
            "cited_papers_abstracts": ["Cited abstract."],
            "publisher": "ACL"
        })
    }

    fn ingest(records: &[Value]) -> Result<CorpusBundle> {
        let text: String = records.iter().map(|r| format!("{r}\n")).collect();
        ingest_str(&text, &IngestConfig::default(), Exec::Sequential)
    }

    #[test]
    fn short_paragraph_dropped() {
        let mut recs: Vec<Value> = (0..9)
            .map(|i| record(&format!("P{i}"), "Related Work", 45))
            .collect();
        recs.push(record("P9", "Related Work", 12));
        let bundle = ingest(&recs).unwrap();
        assert_eq!(bundle.stats.removed_short_paragraph, 1);
        assert_eq!(bundle.instances.len(), 9);
    }

    #[test]
    fn boundary_forty_words() {
        let bundle = ingest(&[
            record("A", "related work", 40),
            record("B", "related work", 39),
        ])
        .unwrap();
        assert_eq!(bundle.instances.len(), 1);
        assert_eq!(bundle.instances[0].citing.paper_id, "A");
    }

    #[test]
    fn mixed_case_title_retained() {
        let bundle = ingest(&[
            record("A", "Related Work", 50),
            record("B", "  BACKGROUND ", 50),
            record("C", "Experiments", 50),
        ])
        .unwrap();
        assert_eq!(bundle.instances.len(), 2);
        assert_eq!(bundle.stats.removed_section_title, 1);
    }

    #[test]
    fn duplicate_title_and_abstract_removed() {
        let a = record("A", "Related Work", 50);
        let mut b = record("B", "Related Work", 60);
        b["title"] = a["title"].clone();
        b["abstract"] = a["abstract"].clone();
        let bundle = ingest(&[a, b]).unwrap();
        assert_eq!(bundle.instances.len(), 1);
        assert_eq!(bundle.stats.removed_duplicate, 1);
    }

    #[test]
    fn same_paper_two_paragraphs_kept() {
        let a = record("A", "Related Work", 50);
        let b = record("A", "Related Work", 55);
        let bundle = ingest(&[a, b]).unwrap();
        assert_eq!(bundle.instances.len(), 2);
        assert_ne!(bundle.instances[0].instance_id, bundle.instances[1].instance_id);
    }

    #[test]
    fn malformed_and_corrupted_counted() {
        let mut bad_mark = record("B", "Related Work", 50);
        bad_mark["cited_paper_marks"] = json!(["<cite>nope</cite>"]);
        let mut no_abs = record("C", "Related Work", 50);
        no_abs["cited_papers_abstracts"] = json!([""]);
        let text = format!(
            "{}\nnot json at all\n{}\n{}\n",
            record("A", "Related Work", 50),
            bad_mark,
            no_abs
        );
        let bundle = ingest_str(&text, &IngestConfig::default(), Exec::Sequential).unwrap();
        assert_eq!(bundle.stats.removed_malformed, 1);
        assert_eq!(bundle.stats.removed_corrupted, 2);
        assert_eq!(bundle.stats.raw_records, 4);
        assert_eq!(bundle.stats.kept + bundle.stats.removed_total(), 4);
    }

    #[test]
    fn language_tag_filters_only_when_present() {
        let mut de = record("D", "Related Work", 50);
        de["language"] = json!("de");
        let mut en = record("E", "Related Work", 50);
        en["language"] = json!("EN");
        let bundle = ingest(&[de, en, record("N", "Related Work", 50)]).unwrap();
        assert_eq!(bundle.stats.removed_non_english, 1);
        assert_eq!(bundle.instances.len(), 2);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = ingest(&[record("A", "Method", 50)]).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus { raw: 1 }));
    }

    #[test]
    fn metadata_captured() {
        let bundle = ingest(&[record("A", "Related Work", 50)]).unwrap();
        let inst = &bundle.instances[0];
        assert_eq!(inst.citing.venue_metadata.get("publisher").unwrap(), "ACL");
        assert_eq!(inst.citations[0].position, inst.paragraph_markup.find("<cite>").unwrap());
    }
}
