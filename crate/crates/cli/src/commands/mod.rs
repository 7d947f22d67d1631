pub mod analyze;
pub mod corpus;
pub mod humeval;
pub mod intents;
pub mod render;
pub mod report;
pub mod run;
pub mod score;

use std::time::Duration;

use citegen_core::gateway::{Backend, Gateway, GenerationCache, RetryPolicy};
use citegen_core::scorer::{ScorerClient, ScorerConfig};
use citegen_core::text::StopWords;
use citegen_core::{Error, Result};

use crate::Ctx;

pub(crate) fn gateway(ctx: &Ctx) -> Result<Gateway> {
    Ok(Gateway::new(
        GenerationCache::open(ctx.layout.cache())?,
        retry_policy(ctx),
    ))
}

pub(crate) fn retry_policy(ctx: &Ctx) -> RetryPolicy {
    let r = &ctx.cfg.file.run;
    let base = Duration::from_millis(r.retry_base_ms);
    RetryPolicy {
        max_attempts: r.max_attempts,
        base_delay: base,
        max_delay: base * 16,
    }
}

pub(crate) fn backend(ctx: &Ctx, id: &str) -> Result<Backend> {
    Backend::from_spec(ctx.cfg.backend_spec(id)?)
}

pub(crate) fn scorer(ctx: &Ctx) -> Option<ScorerClient> {
    let s = &ctx.cfg.file.scorer;
    let url = s.url.as_deref()?;
    let mut cfg = ScorerConfig::new(url);
    cfg.batch_size = s.batch_size;
    cfg.parallelism = s.parallelism;
    cfg.timeout = Duration::from_secs(s.timeout_secs);
    Some(ScorerClient::new(cfg))
}

pub(crate) fn stopwords(ctx: &Ctx) -> Result<StopWords> {
    match &ctx.cfg.file.corpus.stopwords {
        None => Ok(StopWords::default()),
        Some(p) => {
            let path = ctx.cfg.resolve(p);
            let text = std::fs::read_to_string(&path).map_err(|source| Error::Read { path, source })?;
            Ok(StopWords::from_lines(&text))
        }
    }
}
