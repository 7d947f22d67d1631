use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use citegen_core::analysis::csv_with_provenance;
use citegen_core::gateway::GenerationCache;
use citegen_core::humeval::{
    build_tasks, compose_items, coverage, extract_facts, human_measure_inputs,
    human_metric_correlation, CandidateSource, CurationQueue, Study, TaskInput, TaskSet,
};
use citegen_core::metrics::measure_all;
use citegen_core::{Error, Result};

use super::corpus::load_bundle;
use super::render::load_index;
use super::run::{load_manifest, run_backends};
use super::score::{fill_model_metrics, load_measurements, Measurements};
use crate::artifacts::{save, save_text};
use crate::{Ctx, HumevalCmd};

pub fn humeval(ctx: &Ctx, cmd: HumevalCmd) -> Result<()> {
    match cmd {
        HumevalCmd::Prepare { annotators } => prepare(ctx, &annotators),
        HumevalCmd::BuildTasks => build(ctx),
        HumevalCmd::Coverage { partial } => report_coverage(ctx, partial),
        HumevalCmd::MeasureHuman => measure_human(ctx),
    }
}

/// Instances drawn for the study, in prompt-index order.
pub fn sample_instances(ids: &[String], n: usize, seed: u64) -> Vec<String> {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let chosen: BTreeSet<&String> = shuffled.iter().take(n).collect();
    ids.iter().filter(|i| chosen.contains(i)).cloned().collect()
}

fn prepare(ctx: &Ctx, annotators: &[String]) -> Result<()> {
    let dir = ctx.layout.study();
    if dir.join(citegen_core::humeval::study::TASKS_FILE).exists() {
        return Err(Error::InvalidInput(format!(
            "a study already exists in {}; remove it to start over",
            dir.display()
        )));
    }
    let sec = &ctx.cfg.file.humeval;
    let bundle = load_bundle(ctx)?;
    let index = load_index(ctx)?;
    let sampled = sample_instances(&index.instances, sec.sample, sec.seed);
    let gw = super::gateway(ctx)?;
    let backend = super::backend(ctx, &sec.fact_backend)?;
    let mut extractions = Vec::new();
    for id in &sampled {
        let inst = bundle
            .instance(id)
            .ok_or_else(|| Error::InvalidInput(format!("{id} is not in the corpus bundle")))?;
        extractions.push(extract_facts(&gw, &backend, &ctx.cfg.file.decoding, id, &inst.gold_reference())?);
    }
    let queue = CurationQueue::from_extractions(extractions);
    let keep: BTreeSet<&String> = sampled.iter().collect();
    let prompts: Vec<_> = index
        .prompts
        .iter()
        .filter(|p| keep.contains(&p.instance_id))
        .cloned()
        .collect();
    let compose = compose_items(&prompts);
    let mut rng = rand::rng();
    let mut tokens = BTreeMap::new();
    for a in annotators {
        let token = format!("{:032x}", rng.random::<u128>());
        println!("{a}\t{token}");
        tokens.insert(token, a.clone());
    }
    let empty = TaskSet {
        seed: sec.seed,
        tasks: Vec::new(),
        sealed: Default::default(),
        excluded: Vec::new(),
    };
    let study = Study::create(&dir, empty, queue, compose, tokens)?;
    println!(
        "humeval: {} instances sampled, {} facts to curate, {} flagged, {} compose items",
        sampled.len(),
        study.facts.pending().len(),
        study.facts.flagged().len(),
        study.compose.len()
    );
    Ok(())
}

fn build(ctx: &Ctx) -> Result<()> {
    let mut study = Study::open(ctx.layout.study())?;
    if !study.judgments.all().is_empty() {
        return Err(Error::InvalidInput(
            "judgments exist; rebuilding tasks would change the blind labels they refer to".into(),
        ));
    }
    let sec = &ctx.cfg.file.humeval;
    let backends = if sec.backends.is_empty() {
        run_backends(ctx)?
    } else {
        sec.backends.clone()
    };
    let configs: Vec<String> = sec
        .configs
        .iter()
        .map(|c| c.parse::<citegen_core::promptgen::PromptConfig>().map(|p| p.to_string()))
        .collect::<Result<_>>()?;
    let cache = GenerationCache::open(ctx.layout.cache())?;
    let mut candidates: BTreeMap<String, Vec<CandidateSource>> = BTreeMap::new();
    for be in &backends {
        let m = load_manifest(ctx, be)?;
        for cfg in &configs {
            for cell in m.cells.iter().filter(|c| &c.label == cfg) {
                if !study.facts.extractions.contains_key(&cell.instance_id) {
                    continue;
                }
                let Some(rec) = cache.get(&cell.key)? else { continue };
                candidates.entry(cell.instance_id.clone()).or_default().push(CandidateSource {
                    backend_id: be.clone(),
                    config: cfg.clone(),
                    generation_key: cell.key.clone(),
                    text: rec.output_text,
                });
            }
        }
    }
    let inputs: Vec<TaskInput> = study
        .facts
        .extractions
        .values()
        .map(|e| TaskInput {
            instance_id: e.instance_id.clone(),
            gold_text: e.gold_text.clone(),
            candidates: candidates.remove(&e.instance_id).unwrap_or_default(),
        })
        .collect();
    study.tasks = build_tasks(&inputs, &study.facts, sec.seed);
    study.save_tasks()?;
    println!(
        "humeval: {} tasks built, {} instances excluded",
        study.tasks.tasks.len(),
        study.tasks.excluded.len()
    );
    for (id, why) in &study.tasks.excluded {
        println!("  excluded {id}: {why}");
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".into(), |x| format!("{x:.4}"))
}

/// Writes coverage and human-metric correlation CSVs into `dir`.
pub fn coverage_outputs(ctx: &Ctx, partial: bool) -> Result<Vec<(String, String)>> {
    let study = Study::open(ctx.layout.study())?;
    let rep = coverage(&study.tasks, &study.judgments.latest(), partial)?;
    let prov = ctx.prov();
    let mut rows = vec![vec!["backend".to_string(), "config".into(), "n".into(), "coverage".into()]];
    for r in &rep.rows {
        rows.push(vec![r.backend_id.clone(), r.config.clone(), r.n.to_string(), format!("{:.4}", r.mean)]);
    }
    let mut out = vec![("coverage.csv".to_string(), csv_with_provenance(prov, rows)?)];
    if ctx.layout.measurements().exists() {
        let m = load_measurements(ctx)?;
        let corr = human_metric_correlation(&rep.candidates, &m.vectors);
        let mut rows = vec![vec!["metric".to_string(), "n".into(), "r".into(), "p_value".into()]];
        for c in corr {
            rows.push(vec![c.metric, c.n.to_string(), opt(c.r), opt(c.p_value)]);
        }
        out.push(("human_metric_correlation.csv".into(), csv_with_provenance(prov, rows)?));
    }
    save(&ctx.layout.humeval("coverage.json"), prov, &rep)?;
    Ok(out)
}

fn report_coverage(ctx: &Ctx, partial: bool) -> Result<()> {
    for (name, text) in coverage_outputs(ctx, partial)? {
        save_text(&ctx.layout.humeval(&name), &text)?;
        println!("wrote {}", ctx.layout.humeval(&name).display());
    }
    Ok(())
}

fn measure_human(ctx: &Ctx) -> Result<()> {
    let study = Study::open(ctx.layout.study())?;
    let bundle = load_bundle(ctx)?;
    let refs: BTreeMap<String, String> = bundle
        .instances
        .iter()
        .map(|i| (i.instance_id.clone(), i.gold_reference()))
        .collect();
    let inputs = human_measure_inputs(&study.human, &study.compose, &refs)?;
    let mut vectors = measure_all(&inputs, ctx.exec);
    let golds: Vec<&str> = inputs.iter().map(|i| i.reference.as_str()).collect();
    let outputs: Vec<&str> = inputs.iter().map(|i| i.output.as_str()).collect();
    let availability = fill_model_metrics(ctx, &mut vectors, &golds, &outputs)?;
    let n = vectors.len();
    save(&ctx.layout.humeval("human_measurements.json"), ctx.prov(), &Measurements { vectors, availability })?;
    println!("humeval: {n} human paragraphs measured");
    Ok(())
}

pub fn serve(ctx: &Ctx, addr: SocketAddr) -> Result<()> {
    let dir = ctx.layout.study();
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Configuration(format!("runtime: {e}")))?;
    rt.block_on(citegen_humeval_api::serve(&dir, addr))
        .map_err(|e| Error::Configuration(format!("humeval API on {addr}: {e}")))
}
