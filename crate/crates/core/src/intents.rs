//! Free-form and categorical citation intents, plus the n-gram leak audit.

use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::CitationInstance;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gateway::{run_batch, Backend, ChatPrompt, DecodingParams, Gateway, RunManifest};
use crate::text::{boundary_tokens, ngram_set, word_count, StopWords};

pub const FREE_FORM_PROMPT: &str = "What is intention of the following paragraph?";
pub const FREE_FORM_LABEL: &str = "intent:free_form";
pub const MAX_INTENT_WORDS: usize = 60;
/// Unigram overlap above which a generated intent is flagged for review.
pub const LEAK_REVIEW_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    FreeForm,
    Categorical,
}

impl IntentKind {
    pub fn label(self) -> &'static str {
        match self {
            IntentKind::FreeForm => "free-form intent",
            IntentKind::Categorical => "categorical intent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentSource {
    Generated,
    Classifier,
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: IntentKind,
    pub text: String,
    pub source: IntentSource,
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_id: Option<String>,
    #[serde(default)]
    pub review_flag: bool,
}

impl Intent {
    pub fn new(instance_id: &str, kind: IntentKind, text: &str, source: IntentSource) -> Self {
        Intent {
            kind,
            text: text.to_string(),
            source,
            instance_id: instance_id.to_string(),
            backend_id: None,
            review_flag: false,
        }
    }
}

pub fn free_form_prompt(instance: &CitationInstance) -> ChatPrompt {
    ChatPrompt {
        system: String::new(),
        user: format!("{FREE_FORM_PROMPT}\n{}", instance.gold_reference()),
        label: FREE_FORM_LABEL.to_string(),
        instance_id: instance.instance_id.clone(),
    }
}

/// First non-empty line of a model response, checked against the intent
/// invariants.
pub fn parse_free_form_response(instance_id: &str, response: &str) -> Result<String> {
    let line = response
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or_else(|| Error::InvalidIntent {
            instance_id: instance_id.to_string(),
            reason: "empty response".into(),
        })?;
    let words = word_count(line);
    if words > MAX_INTENT_WORDS {
        return Err(Error::InvalidIntent {
            instance_id: instance_id.to_string(),
            reason: format!("{words} words exceeds the {MAX_INTENT_WORDS}-word cap"),
        });
    }
    Ok(line.to_string())
}

/// Unigram content-word overlap of gold with `other`, relative to gold.
pub fn unigram_leak(gold: &str, other: &str, stop: &StopWords) -> Option<f64> {
    overlap_ratio(gold, other, 1, stop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentBatch {
    pub intents: Vec<Intent>,
    /// Instances without a usable intent, with the reason.
    pub rejected: BTreeMap<String, String>,
    pub manifest: RunManifest,
}

/// Generate free-form intents for all instances with greedy decoding.
pub fn generate_free_form_intents(
    gateway: &Gateway,
    backend: &Backend,
    instances: &[CitationInstance],
    max_new_tokens: u32,
    parallelism: usize,
    stop: &StopWords,
) -> Result<IntentBatch> {
    let params = DecodingParams {
        max_new_tokens,
        ..DecodingParams::default()
    };
    let prompts: Vec<ChatPrompt> = instances
        .iter()
        .filter(|i| !i.paragraph_text.trim().is_empty())
        .map(free_form_prompt)
        .collect();
    let manifest = run_batch(gateway, &prompts, backend, &params, parallelism)?;

    let mut intents = Vec::new();
    let mut rejected = BTreeMap::new();
    for inst in instances {
        if inst.paragraph_text.trim().is_empty() {
            rejected.insert(inst.instance_id.clone(), "empty gold paragraph".to_string());
        }
    }
    let cells: BTreeMap<&str, &crate::gateway::CellOutcome> = manifest
        .cells
        .iter()
        .map(|c| (c.instance_id.as_str(), c))
        .collect();
    for inst in instances.iter().filter(|i| !i.paragraph_text.trim().is_empty()) {
        let cell = cells[inst.instance_id.as_str()];
        if let Some(err) = &cell.error {
            rejected.insert(inst.instance_id.clone(), err.clone());
            continue;
        }
        let Some(record) = gateway.cache().get(&cell.key)? else {
            return Err(Error::Cache(format!("record {} missing after generation", cell.key)));
        };
        match parse_free_form_response(&inst.instance_id, &record.output_text) {
            Ok(text) => {
                let mut intent = Intent::new(&inst.instance_id, IntentKind::FreeForm, &text, IntentSource::Generated);
                intent.backend_id = Some(backend.id().to_string());
                let leak = unigram_leak(&inst.gold_reference(), &text, stop).unwrap_or(0.0);
                if leak > LEAK_REVIEW_THRESHOLD {
                    tracing::warn!("{}: intent shares {:.2} of gold unigrams", inst.instance_id, leak);
                    intent.review_flag = true;
                }
                intents.push(intent);
            }
            Err(e) => {
                rejected.insert(inst.instance_id.clone(), e.to_string());
            }
        }
    }
    Ok(IntentBatch {
        intents,
        rejected,
        manifest,
    })
}

/// Source of categorical labels.
pub trait IntentClassifier: Sync {
    fn classify(&self, instance: &CitationInstance) -> Result<String>;
    fn source(&self) -> IntentSource;
}

/// Labels shipped in the corpus file's `categorical_intent` column.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProvidedColumn;

impl IntentClassifier for ProvidedColumn {
    fn classify(&self, instance: &CitationInstance) -> Result<String> {
        match &instance.categorical_intent {
            Some(l) if !l.trim().is_empty() => Ok(l.trim().to_string()),
            Some(_) => Err(Error::InvalidIntent {
                instance_id: instance.instance_id.clone(),
                reason: "empty categorical label".into(),
            }),
            None => Err(Error::Configuration(format!(
                "{} has no categorical_intent column and no classifier is configured",
                instance.instance_id
            ))),
        }
    }

    fn source(&self) -> IntentSource {
        IntentSource::Provided
    }
}

/// HTTP classifier: POST `{instance_id, paragraph}` and read `{label}`.
pub struct RemoteClassifier {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteClassifier {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteClassifier {
            endpoint: endpoint.to_string(),
            agent,
        }
    }
}

#[derive(Deserialize)]
struct LabelReply {
    label: String,
}

impl IntentClassifier for RemoteClassifier {
    fn classify(&self, instance: &CitationInstance) -> Result<String> {
        let body = serde_json::json!({
            "instance_id": instance.instance_id,
            "paragraph": instance.gold_reference(),
        });
        let reply: LabelReply = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .and_then(|mut r| r.body_mut().read_json())
            .map_err(|e| Error::Configuration(format!("intent classifier unavailable: {e}")))?;
        let label = reply.label.trim();
        if label.is_empty() {
            return Err(Error::InvalidIntent {
                instance_id: instance.instance_id.clone(),
                reason: "classifier returned an empty label".into(),
            });
        }
        Ok(label.to_string())
    }

    fn source(&self) -> IntentSource {
        IntentSource::Classifier
    }
}

pub fn assign_categorical_intent(
    instance: &CitationInstance,
    classifier: &dyn IntentClassifier,
) -> Result<Intent> {
    let label = classifier.classify(instance)?;
    Ok(Intent::new(
        &instance.instance_id,
        IntentKind::Categorical,
        &label,
        classifier.source(),
    ))
}

/// `intents.json`: instance id → kind → intent.
pub type IntentTable = BTreeMap<String, BTreeMap<IntentKind, Intent>>;

pub fn intent_table(intents: impl IntoIterator<Item = Intent>) -> IntentTable {
    let mut t = IntentTable::new();
    for i in intents {
        t.entry(i.instance_id.clone()).or_default().insert(i.kind, i);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakRatios {
    pub gold_vs_intent: f64,
    pub gold_vs_abstract: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakReport {
    pub per_n: BTreeMap<usize, LeakRatios>,
    /// Instances audited for each n.
    pub audited: BTreeMap<usize, usize>,
    /// Instances whose gold paragraph has no content n-grams for that n.
    pub skipped: BTreeMap<usize, usize>,
    pub flagged: Vec<String>,
}

/// |grams(gold) ∩ grams(other)| / |grams(gold)| over unique content n-grams;
/// `None` when gold has none.
pub fn overlap_ratio(gold: &str, other: &str, n: usize, stop: &StopWords) -> Option<f64> {
    let g = content_tokens(gold, stop);
    let o = content_tokens(other, stop);
    let gs = ngram_set(&g, n);
    if gs.is_empty() {
        return None;
    }
    let os: HashSet<&[String]> = ngram_set(&o, n);
    Some(gs.intersection(&os).count() as f64 / gs.len() as f64)
}

fn content_tokens(text: &str, stop: &StopWords) -> Vec<String> {
    boundary_tokens(text)
        .into_iter()
        .filter(|t| !stop.contains(t))
        .collect()
}

/// Average gold-vs-intent and gold-vs-abstracts overlap for n = 1..3.
pub fn leak_audit(
    intents: &BTreeMap<String, Intent>,
    instances: &[CitationInstance],
    stop: &StopWords,
    exec: Exec,
) -> Result<LeakReport> {
    let mut rows = Vec::with_capacity(instances.len());
    for inst in instances {
        let intent = intents.get(&inst.instance_id).ok_or_else(|| {
            Error::MissingComponent {
                instance_id: inst.instance_id.clone(),
                component: "intent",
            }
        })?;
        let cited = inst.cited().map(|c| c.abstract_text.as_str()).unwrap_or("");
        if cited.trim().is_empty() || inst.citing.abstract_text.trim().is_empty() {
            return Err(Error::MissingComponent {
                instance_id: inst.instance_id.clone(),
                component: "abstract",
            });
        }
        rows.push((inst, intent, format!("{} {}", inst.citing.abstract_text, cited)));
    }

    let per_instance = exec.map(&rows, |(inst, intent, abstracts)| {
        let gold = inst.gold_reference();
        (1..=3usize)
            .map(|n| {
                let a = overlap_ratio(&gold, &intent.text, n, stop);
                let b = overlap_ratio(&gold, abstracts, n, stop);
                a.zip(b)
            })
            .collect::<Vec<_>>()
    });

    let mut report = LeakReport {
        per_n: BTreeMap::new(),
        audited: BTreeMap::new(),
        skipped: BTreeMap::new(),
        flagged: Vec::new(),
    };
    for n in 1..=3usize {
        let mut sum_i = 0.0;
        let mut sum_a = 0.0;
        let mut count = 0usize;
        for (row, values) in rows.iter().zip(&per_instance) {
            match values[n - 1] {
                Some((i, a)) => {
                    sum_i += i;
                    sum_a += a;
                    count += 1;
                    if n == 1 && i > LEAK_REVIEW_THRESHOLD {
                        report.flagged.push(row.0.instance_id.clone());
                    }
                }
                None => *report.skipped.entry(n).or_default() += 1,
            }
        }
        report.skipped.entry(n).or_default();
        report.audited.insert(n, count);
        if count > 0 {
            report.per_n.insert(
                n,
                LeakRatios {
                    gold_vs_intent: sum_i / count as f64,
                    gold_vs_abstract: sum_a / count as f64,
                },
            );
        }
    }
    report.flagged.sort();
    Ok(report)
}
