use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use citegen_core::corpus::select_single_citation;
use citegen_core::gateway::RunManifest;
use citegen_core::intents::{
    assign_categorical_intent, generate_free_form_intents, intent_table, leak_audit, Intent,
    IntentClassifier, IntentKind, IntentTable, LeakReport, ProvidedColumn, RemoteClassifier,
};
use citegen_core::{Error, Result};

use super::corpus::load_bundle;
use crate::artifacts::{load, save};
use crate::Ctx;

/// `intents/rejected.json`: kind label -> instance -> reason.
pub type Rejections = BTreeMap<String, BTreeMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRun {
    pub manifest: RunManifest,
    pub rejected: Rejections,
    pub leak_audit: Option<LeakReport>,
}

pub fn load_intents(ctx: &Ctx) -> Result<IntentTable> {
    Ok(load::<IntentTable>(&ctx.layout.intents(), "intents")?.data)
}

pub fn intents(ctx: &Ctx) -> Result<()> {
    let bundle = load_bundle(ctx)?;
    let instances = select_single_citation(&bundle.instances);
    let stop = super::stopwords(ctx)?;
    let sec = &ctx.cfg.file.intents;
    let gw = super::gateway(ctx)?;
    let backend = super::backend(ctx, &sec.backend)?;
    let batch = generate_free_form_intents(
        &gw,
        &backend,
        &instances,
        sec.max_new_tokens,
        ctx.cfg.file.run.parallelism,
        &stop,
    )?;

    let mut rejected = Rejections::new();
    rejected.insert(IntentKind::FreeForm.label().to_string(), batch.rejected.clone());

    let classifier: Box<dyn IntentClassifier> = match &sec.classifier {
        Some(url) => Box::new(RemoteClassifier::new(url, Duration::from_secs(60))),
        None => Box::new(ProvidedColumn),
    };
    let mut categorical = Vec::new();
    let cat_rej = rejected.entry(IntentKind::Categorical.label().to_string()).or_default();
    for inst in &instances {
        match assign_categorical_intent(inst, classifier.as_ref()) {
            Ok(i) => categorical.push(i),
            Err(e @ Error::InvalidIntent { .. }) | Err(e @ Error::Configuration(_)) => {
                cat_rej.insert(inst.instance_id.clone(), e.to_string());
            }
            Err(e) => return Err(e),
        }
    }

    let free: BTreeMap<String, Intent> = batch
        .intents
        .iter()
        .map(|i| (i.instance_id.clone(), i.clone()))
        .collect();
    let audited: Vec<_> = instances
        .iter()
        .filter(|i| free.contains_key(&i.instance_id))
        .cloned()
        .collect();
    let audit = if audited.is_empty() {
        None
    } else {
        Some(leak_audit(&free, &audited, &stop, ctx.exec)?)
    };

    let n_free = batch.intents.len();
    let table = intent_table(batch.intents.into_iter().chain(categorical));
    save(&ctx.layout.intents(), ctx.prov(), &table)?;
    let run = IntentRun {
        manifest: batch.manifest,
        rejected,
        leak_audit: audit,
    };
    save(&ctx.layout.intents_dir().join("run.json"), ctx.prov(), &run)?;
    println!(
        "intents: {n_free} free-form, {} categorical, {} rejected",
        table.values().filter(|m| m.contains_key(&IntentKind::Categorical)).count(),
        run.rejected.values().map(BTreeMap::len).sum::<usize>()
    );
    if let Some(a) = &run.leak_audit {
        for (n, r) in &a.per_n {
            println!(
                "leak audit n={n}: gold/intent {:.4}, gold/abstracts {:.4}",
                r.gold_vs_intent, r.gold_vs_abstract
            );
        }
    }
    if !run.manifest.is_complete() {
        return Err(Error::IncompleteRun {
            failed: run.manifest.failed(),
            total: run.manifest.total(),
        });
    }
    Ok(())
}
