use citegen_core::gateway::{run_batch, ChatPrompt, RunManifest};
use citegen_core::{Error, Result};

use super::render::load_index;
use crate::artifacts::{load, save};
use crate::Ctx;

pub fn load_manifest(ctx: &Ctx, backend: &str) -> Result<RunManifest> {
    Ok(load::<RunManifest>(&ctx.layout.manifest(backend), "run")?.data)
}

/// Backends that have a manifest on disk, sorted.
pub fn run_backends(ctx: &Ctx) -> Result<Vec<String>> {
    let dir = ctx.layout.runs_dir();
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(&dir) {
        for e in rd.flatten() {
            if e.path().join("manifest.json").exists() {
                out.push(e.file_name().to_string_lossy().into_owned());
            }
        }
    }
    if out.is_empty() {
        return Err(Error::MissingArtifact {
            path: dir.join("<backend>/manifest.json"),
            stage: "run",
        });
    }
    out.sort();
    Ok(out)
}

pub fn run(ctx: &Ctx, backends: &[String]) -> Result<()> {
    let index = load_index(ctx)?;
    let ids: Vec<String> = if backends.is_empty() {
        let configured: Vec<String> = ctx.cfg.file.backends.iter().map(|b| b.backend_id.clone()).collect();
        if configured.is_empty() {
            vec![crate::config::BUILTIN_STUB.to_string()]
        } else {
            configured
        }
    } else {
        backends.to_vec()
    };
    let gw = super::gateway(ctx)?;
    let prompts: Vec<ChatPrompt> = index.prompts.iter().map(ChatPrompt::from).collect();
    let mut failed = 0;
    let mut total = 0;
    for id in &ids {
        let backend = super::backend(ctx, id)?;
        let m = run_batch(&gw, &prompts, &backend, &ctx.cfg.file.decoding, ctx.cfg.file.run.parallelism)?;
        save(&ctx.layout.manifest(id), ctx.prov(), &m)?;
        println!(
            "run {id}: {} cells, {} generated, {} cached, {} failed",
            m.total(),
            m.count(citegen_core::gateway::CellStatus::Ok),
            m.count(citegen_core::gateway::CellStatus::Cached),
            m.failed()
        );
        failed += m.failed();
        total += m.total();
    }
    if failed > 0 {
        return Err(Error::IncompleteRun { failed, total });
    }
    Ok(())
}
