use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use citegen_core::corpus::{
    ingest_str, select_example, select_single_citation, CorpusBundle, IngestConfig, LexicalJaccard,
    SelectedExample, SimilarityProvider,
};
use citegen_core::scorer::EmbeddingSimilarity;
use citegen_core::{Error, Result};

use crate::artifacts::{load, save};
use crate::Ctx;

/// `corpus/examples.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSelection {
    pub provider: String,
    pub selected: BTreeMap<String, SelectedExample>,
    /// Single-citation instances whose cited paper has no eligible sentence.
    pub missing: Vec<String>,
}

pub fn load_bundle(ctx: &Ctx) -> Result<CorpusBundle> {
    Ok(load::<CorpusBundle>(&ctx.layout.bundle(), "ingest")?.data)
}

pub fn ingest(ctx: &Ctx) -> Result<()> {
    let c = &ctx.cfg.file.corpus;
    let mut cfg = IngestConfig {
        min_paragraph_words: c.min_paragraph_words,
        min_sentence_words: c.min_sentence_words,
        language_filter: c.language_filter,
        ..IngestConfig::default()
    };
    if let Some(titles) = &c.section_titles {
        cfg = cfg.with_titles_file(&ctx.cfg.resolve(titles))?;
    }
    let path = ctx.cfg.resolve(&c.raw);
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Read {
        path: path.clone(),
        source,
    })?;
    let bundle = ingest_str(&text, &cfg, ctx.exec)?;
    save(&ctx.layout.bundle(), ctx.prov(), &bundle)?;
    let s = &bundle.stats;
    println!(
        "ingest: {} raw, {} kept ({} single-citation), {} removed; pool: {} sentences for {} cited papers",
        s.raw_records,
        s.kept,
        select_single_citation(&bundle.instances).len(),
        s.removed_total(),
        bundle.pool.sentence_count(),
        bundle.pool.cited_paper_count()
    );
    Ok(())
}

pub fn pool(ctx: &Ctx) -> Result<()> {
    let bundle = load_bundle(ctx)?;
    let client = super::scorer(ctx);
    let embedding = client.as_ref().map(EmbeddingSimilarity::new);
    let lexical = LexicalJaccard;
    let (primary, fallback): (&dyn SimilarityProvider, Option<&dyn SimilarityProvider>) = match &embedding {
        Some(e) => (e, Some(&lexical)),
        None => (&lexical, None),
    };
    let mut selected = BTreeMap::new();
    let mut missing = Vec::new();
    for inst in select_single_citation(&bundle.instances) {
        match select_example(&bundle.pool, &inst, primary, fallback)? {
            Some(mut s) => {
                if embedding.is_none() {
                    // no embedding service configured: the lexical ranking is the fallback
                    s.provenance.fallback_used = true;
                }
                selected.insert(inst.instance_id.clone(), s);
            }
            None => missing.push(inst.instance_id.clone()),
        }
    }
    let out = ExampleSelection {
        provider: primary.name().to_string(),
        selected,
        missing,
    };
    save(&ctx.layout.examples(), ctx.prov(), &out)?;
    println!(
        "pool: {} instances with an example, {} without ({})",
        out.selected.len(),
        out.missing.len(),
        out.provider
    );
    Ok(())
}
