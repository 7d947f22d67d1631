use serde::{Deserialize, Serialize};

use citegen_core::corpus::{select_single_citation, CitationInstance};
use citegen_core::intents::{IntentKind, IntentTable};
use citegen_core::promptgen::{render_prompt, IntentChoice, PromptConfig, RenderedPrompt, TemplateSet};
use citegen_core::{Error, Result};

use super::corpus::{load_bundle, ExampleSelection};
use super::intents::load_intents;
use crate::artifacts::{load, save};
use crate::Ctx;

/// `prompts/index.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptIndex {
    pub configs: Vec<String>,
    pub instances: Vec<String>,
    /// Configuration-major, instances in corpus order.
    pub prompts: Vec<RenderedPrompt>,
    /// Instances left out because some configuration lacked a component.
    pub excluded: Vec<(String, String)>,
}

pub fn load_index(ctx: &Ctx) -> Result<PromptIndex> {
    Ok(load::<PromptIndex>(&ctx.layout.prompt_index(), "render")?.data)
}

pub fn templates(ctx: &Ctx) -> Result<TemplateSet> {
    match &ctx.cfg.file.templates.dir {
        Some(d) => TemplateSet::load_dir(&ctx.cfg.resolve(d)),
        None => Ok(TemplateSet::builtin()),
    }
}

fn render_one(
    templates: &TemplateSet,
    config: &PromptConfig,
    inst: &CitationInstance,
    intents: &IntentTable,
    examples: &ExampleSelection,
) -> Result<RenderedPrompt> {
    let kind = match config.intent {
        IntentChoice::None => None,
        IntentChoice::Categorical => Some(IntentKind::Categorical),
        IntentChoice::FreeForm => Some(IntentKind::FreeForm),
    };
    let intent = kind.and_then(|k| intents.get(&inst.instance_id).and_then(|m| m.get(&k)));
    let example = examples.selected.get(&inst.instance_id).map(|s| &s.example);
    render_prompt(templates, config, inst, intent, example)
}

fn write_prompt(ctx: &Ctx, p: &RenderedPrompt) -> Result<std::path::PathBuf> {
    let path = p.export_path(&ctx.layout.prompts_dir());
    save(&path, ctx.prov(), &p.to_file())?;
    Ok(path)
}

pub fn render(ctx: &Ctx, only: Option<&str>, instance: Option<&str>) -> Result<()> {
    let bundle = load_bundle(ctx)?;
    let examples = load::<ExampleSelection>(&ctx.layout.examples(), "pool")?.data;
    let intents = load_intents(ctx)?;
    let templates = templates(ctx)?;

    if let (Some(cfg), Some(id)) = (only, instance) {
        let config: PromptConfig = cfg.parse()?;
        let inst = bundle
            .instance(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown instance {id}")))?;
        let p = render_one(&templates, &config, inst, &intents, &examples)?;
        let path = write_prompt(ctx, &p)?;
        println!("{}", path.display());
        if !p.system_text.is_empty() {
            println!("--- system\n{}", p.system_text);
        }
        println!("--- user\n{}", p.user_text);
        return Ok(());
    }

    let matrix = ctx.cfg.matrix()?;
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    'inst: for inst in select_single_citation(&bundle.instances) {
        let mut rendered = Vec::with_capacity(matrix.len());
        for config in &matrix {
            match render_one(&templates, config, &inst, &intents, &examples) {
                Ok(p) => rendered.push(p),
                Err(e @ Error::MissingComponent { .. }) => {
                    excluded.push((inst.instance_id.clone(), format!("{config}: {e}")));
                    continue 'inst;
                }
                Err(e) => return Err(e),
            }
        }
        kept.push((inst.instance_id.clone(), rendered));
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no instance has every component of the run matrix ({} excluded)",
            excluded.len()
        )));
    }
    let mut prompts = Vec::with_capacity(kept.len() * matrix.len());
    for (ci, _) in matrix.iter().enumerate() {
        for (_, rendered) in &kept {
            prompts.push(rendered[ci].clone());
        }
    }
    for p in &prompts {
        write_prompt(ctx, p)?;
    }
    let index = PromptIndex {
        configs: matrix.iter().map(ToString::to_string).collect(),
        instances: kept.iter().map(|(id, _)| id.clone()).collect(),
        prompts,
        excluded,
    };
    save(&ctx.layout.prompt_index(), ctx.prov(), &index)?;
    println!(
        "render: {} configurations x {} instances = {} prompts ({} instances excluded)",
        index.configs.len(),
        index.instances.len(),
        index.prompts.len(),
        index.excluded.len()
    );
    Ok(())
}
