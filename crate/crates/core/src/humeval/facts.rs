use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Backend, ChatPrompt, DecodingParams, Gateway};
use crate::text::word_count;

/// Instruction sent ahead of the gold paragraph.
pub const FACT_EXTRACTION_PROMPT: &str = include_str!("../../config/fact_extraction_prompt.txt");
pub const FACT_LABEL: &str = "humeval:facts";
/// Longer lines are treated as unsplit prose.
pub const MAX_FACT_WORDS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactStatus {
    Extracted,
    Curated,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicFact {
    pub fact_id: String,
    pub instance_id: String,
    pub text: String,
    pub status: FactStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionFlag {
    EmptyResponse,
    /// The response could not be read as one fact per line; the raw text is
    /// kept for a curator to split by hand.
    NeedsManualSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactExtraction {
    pub instance_id: String,
    /// Paragraph the facts were extracted from, shown to curators.
    #[serde(default)]
    pub gold_text: String,
    pub facts: Vec<AtomicFact>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<ExtractionFlag>,
}

pub fn fact_prompt(instance_id: &str, gold: &str) -> ChatPrompt {
    ChatPrompt {
        system: String::new(),
        user: format!("{}\n\n{}", FACT_EXTRACTION_PROMPT.trim(), gold.trim()),
        label: FACT_LABEL.to_string(),
        instance_id: instance_id.to_string(),
    }
}

fn strip_bullet(line: &str) -> &str {
    let t = line.trim();
    for b in ["- ", "* ", "• ", "– "] {
        if let Some(rest) = t.strip_prefix(b) {
            return rest.trim();
        }
    }
    let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim();
        }
    }
    t
}

fn fact_id(instance_id: &str, ordinal: usize) -> String {
    format!("{instance_id}#f{ordinal}")
}

/// One fact per non-empty line, bullets and numbering removed, duplicates
/// dropped case-insensitively (first spelling kept).
pub fn parse_facts(instance_id: &str, raw: &str) -> FactExtraction {
    let mut seen = BTreeSet::new();
    let mut texts = Vec::new();
    for line in raw.lines() {
        let text = strip_bullet(line);
        if text.is_empty() {
            continue;
        }
        if seen.insert(text.to_lowercase()) {
            texts.push(text.to_string());
        }
    }
    let flag = if texts.is_empty() {
        Some(ExtractionFlag::EmptyResponse)
    } else if texts.iter().any(|t| word_count(t) > MAX_FACT_WORDS) {
        Some(ExtractionFlag::NeedsManualSplit)
    } else {
        None
    };
    let facts = if flag.is_some() {
        Vec::new()
    } else {
        texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| AtomicFact {
                fact_id: fact_id(instance_id, i + 1),
                instance_id: instance_id.to_string(),
                text,
                status: FactStatus::Extracted,
            })
            .collect()
    };
    FactExtraction {
        instance_id: instance_id.to_string(),
        gold_text: String::new(),
        facts,
        raw: raw.to_string(),
        flag,
    }
}

pub fn extract_facts(
    gateway: &Gateway,
    backend: &Backend,
    params: &DecodingParams,
    instance_id: &str,
    gold: &str,
) -> Result<FactExtraction> {
    let (record, _) = gateway.generate(&fact_prompt(instance_id, gold), backend, params)?;
    let mut e = parse_facts(instance_id, &record.output_text);
    e.gold_text = gold.to_string();
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CurationAction {
    Accept { fact_id: String },
    Edit { fact_id: String, text: String },
    Reject { fact_id: String },
    /// New curated fact, used when splitting a flagged response by hand.
    Add { instance_id: String, text: String },
}

/// Extracted facts awaiting or past curation, keyed by instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationQueue {
    pub extractions: BTreeMap<String, FactExtraction>,
}

impl CurationQueue {
    pub fn from_extractions(items: impl IntoIterator<Item = FactExtraction>) -> Self {
        CurationQueue {
            extractions: items.into_iter().map(|e| (e.instance_id.clone(), e)).collect(),
        }
    }

    pub fn pending(&self) -> Vec<&AtomicFact> {
        self.extractions
            .values()
            .flat_map(|e| &e.facts)
            .filter(|f| f.status == FactStatus::Extracted)
            .collect()
    }

    /// Instances whose extraction was flagged and that still have no
    /// curated fact.
    pub fn flagged(&self) -> Vec<(&str, ExtractionFlag)> {
        self.extractions
            .values()
            .filter(|e| !e.facts.iter().any(|f| f.status == FactStatus::Curated))
            .filter_map(|e| e.flag.map(|f| (e.instance_id.as_str(), f)))
            .collect()
    }

    pub fn curated(&self, instance_id: &str) -> Vec<AtomicFact> {
        self.extractions
            .get(instance_id)
            .map(|e| {
                e.facts
                    .iter()
                    .filter(|f| f.status == FactStatus::Curated)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default()
    }

    fn find(&mut self, fact_id: &str) -> Result<&mut AtomicFact> {
        self.extractions
            .values_mut()
            .flat_map(|e| e.facts.iter_mut())
            .find(|f| f.fact_id == fact_id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fact {fact_id}")))
    }

    pub fn apply(&mut self, action: &CurationAction) -> Result<AtomicFact> {
        let nonempty = |t: &str| {
            if t.trim().is_empty() {
                Err(Error::InvalidInput("fact text is empty".into()))
            } else {
                Ok(t.trim().to_string())
            }
        };
        match action {
            CurationAction::Accept { fact_id } => {
                let f = self.find(fact_id)?;
                f.status = FactStatus::Curated;
                Ok(f.clone())
            }
            CurationAction::Reject { fact_id } => {
                let f = self.find(fact_id)?;
                f.status = FactStatus::Rejected;
                Ok(f.clone())
            }
            CurationAction::Edit { fact_id, text } => {
                let text = nonempty(text)?;
                let f = self.find(fact_id)?;
                f.text = text;
                f.status = FactStatus::Curated;
                Ok(f.clone())
            }
            CurationAction::Add { instance_id, text } => {
                let text = nonempty(text)?;
                let e = self
                    .extractions
                    .get_mut(instance_id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown instance {instance_id}")))?;
                let fact = AtomicFact {
                    fact_id: fact_id(instance_id, e.facts.len() + 1),
                    instance_id: instance_id.clone(),
                    text,
                    status: FactStatus::Curated,
                };
                e.facts.push(fact.clone());
                Ok(fact)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendSpec, GenerationCache, RetryPolicy, StubMode};

    #[test]
    fn one_fact_per_line() {
        let raw = "- Result: BERT achieves better F1 score.\n\n2. The model is trained on SQuAD.\n* result: bert achieves better f1 score.\n";
        let e = parse_facts("i1", raw);
        assert_eq!(e.flag, None);
        let texts: Vec<&str> = e.facts.iter().map(|f| f.text.as_str()).collect();
        assert_eq!(texts, ["Result: BERT achieves better F1 score.", "The model is trained on SQuAD."]);
        assert_eq!(e.facts[1].fact_id, "i1#f2");
        assert!(e.facts.iter().all(|f| f.status == FactStatus::Extracted));
    }

    #[test]
    fn empty_and_unsplit_responses_are_flagged() {
        let e = parse_facts("i1", "  \n\n");
        assert!(e.facts.is_empty());
        assert_eq!(e.flag, Some(ExtractionFlag::EmptyResponse));
        let prose = "word ".repeat(70);
        let e = parse_facts("i2", &prose);
        assert!(e.facts.is_empty());
        assert_eq!(e.flag, Some(ExtractionFlag::NeedsManualSplit));
        assert_eq!(e.raw, prose);
        let q = CurationQueue::from_extractions([e]);
        assert_eq!(q.flagged(), [("i2", ExtractionFlag::NeedsManualSplit)]);
    }

    #[test]
    fn curation_flow() {
        let mut q = CurationQueue::from_extractions([parse_facts("i1", "a b\nc d\ne f")]);
        assert_eq!(q.pending().len(), 3);
        q.apply(&CurationAction::Accept { fact_id: "i1#f1".into() }).unwrap();
        q.apply(&CurationAction::Edit { fact_id: "i1#f2".into(), text: " C D ".into() }).unwrap();
        q.apply(&CurationAction::Reject { fact_id: "i1#f3".into() }).unwrap();
        q.apply(&CurationAction::Add { instance_id: "i1".into(), text: "g h".into() }).unwrap();
        let curated: Vec<String> = q.curated("i1").into_iter().map(|f| f.text).collect();
        assert_eq!(curated, ["a b", "C D", "g h"]);
        assert!(q.pending().is_empty());
        assert!(q.apply(&CurationAction::Accept { fact_id: "zz".into() }).is_err());
        assert!(q.apply(&CurationAction::Add { instance_id: "i1".into(), text: " ".into() }).is_err());
    }

    #[test]
    fn extraction_through_gateway() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::new(GenerationCache::open(dir.path()).unwrap(), RetryPolicy::no_wait(1));
        let backend = Backend::from_spec(BackendSpec::stub(
            "s",
            StubMode::Canned { text: "Fact one.\nFact two.\nfact ONE.".into() },
        ))
        .unwrap();
        let e = extract_facts(&gw, &backend, &DecodingParams::default(), "i1", "gold").unwrap();
        assert_eq!(e.facts.len(), 2);
        let p = fact_prompt("i1", "gold text");
        assert!(p.user.starts_with("List the minimal standalone facts"));
        assert!(p.user.ends_with("\n\ngold text"));
    }
}
