use serde::{Deserialize, Serialize};

use super::{Backend, CacheStatus, ChatPrompt, DecodingParams, Gateway, WireDialect};
use crate::error::Result;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Cached,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub label: String,
    pub instance_id: String,
    pub key: String,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Outcome of one batch. Carries no timestamps so that reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub backend_id: String,
    pub model_name: String,
    pub wire_dialect: WireDialect,
    pub params: DecodingParams,
    pub cells: Vec<CellOutcome>,
}

impl RunManifest {
    pub fn total(&self) -> usize {
        self.cells.len()
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }

    pub fn failed(&self) -> usize {
        self.count(CellStatus::Failed)
    }

    pub fn is_complete(&self) -> bool {
        self.failed() == 0
    }

    /// Merge the cells of another manifest for the same backend.
    pub fn merge(&mut self, other: RunManifest) {
        self.cells.extend(other.cells);
        self.sort();
    }

    fn sort(&mut self) {
        self.cells
            .sort_by(|a, b| (&a.label, &a.instance_id).cmp(&(&b.label, &b.instance_id)));
    }
}

/// Generate every prompt on one backend with up to `parallelism` requests in
/// flight. Failures are recorded per cell; only setup errors abort the batch.
pub fn run_batch(
    gateway: &Gateway,
    prompts: &[ChatPrompt],
    backend: &Backend,
    params: &DecodingParams,
    parallelism: usize,
) -> Result<RunManifest> {
    let params = params.normalized()?;
    let one = |p: &ChatPrompt| -> CellOutcome {
        let key = super::generation_key(&backend.spec, &params, p);
        let (status, error) = match gateway.generate(p, backend, &params) {
            Ok((_, CacheStatus::Hit)) => (CellStatus::Cached, None),
            Ok((_, CacheStatus::Miss)) => (CellStatus::Ok, None),
            Err(e) => {
                tracing::warn!("{} {} {}: {e}", backend.id(), p.label, p.instance_id);
                (CellStatus::Failed, Some(e.to_string()))
            }
        };
        CellOutcome {
            label: p.label.clone(),
            instance_id: p.instance_id.clone(),
            key,
            status,
            error,
        }
    };
    let cells = crate::exec::bounded_map(prompts, parallelism, one);
    let mut manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        backend_id: backend.spec.backend_id.clone(),
        model_name: backend.spec.model_name.clone(),
        wire_dialect: backend.spec.wire_dialect,
        params,
        cells,
    };
    manifest.sort();
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{
        BackendSpec, ChatReply, ChatRequest, ChatTransport, GenerationCache, RetryPolicy,
        StubMode, TransportError,
    };
    use std::sync::Arc;

    struct FailOn(&'static str);
    impl ChatTransport for FailOn {
        fn complete(&self, r: &ChatRequest) -> std::result::Result<ChatReply, TransportError> {
            if r.user.contains(self.0) {
                Err(TransportError::Fatal("HTTP 400".into()))
            } else {
                Ok(ChatReply {
                    content: r.user.to_uppercase(),
                    raw: serde_json::Value::Null,
                })
            }
        }
    }

    fn prompts() -> Vec<ChatPrompt> {
        (0..12)
            .map(|i| ChatPrompt {
                system: String::new(),
                user: format!("prompt {i}"),
                label: format!("{}+A", 1 + i % 3),
                instance_id: format!("inst-{i:02}"),
            })
            .collect()
    }

    #[test]
    fn records_failures_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::new(GenerationCache::open(dir.path()).unwrap(), RetryPolicy::no_wait(1));
        let failing = Backend::with_transport(
            BackendSpec::stub("b", StubMode::Echo),
            Arc::new(FailOn("prompt 7")),
        );
        let m = run_batch(&gw, &prompts(), &failing, &DecodingParams::default(), 4).unwrap();
        assert_eq!(m.total(), 12);
        assert_eq!(m.failed(), 1);
        assert_eq!(m.count(CellStatus::Ok), 11);
        assert!(!m.is_complete());

        let healthy = Backend::with_transport(
            BackendSpec::stub("b", StubMode::Echo),
            Arc::new(FailOn("never")),
        );
        let again = run_batch(&gw, &prompts(), &healthy, &DecodingParams::default(), 4).unwrap();
        assert_eq!(again.count(CellStatus::Cached), 11);
        assert_eq!(again.count(CellStatus::Ok), 1);
        assert!(again.is_complete());
    }

    #[test]
    fn manifest_order_independent_of_parallelism() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let backend = Backend::from_spec(BackendSpec::stub("s", StubMode::Echo)).unwrap();
        let run = |d: &tempfile::TempDir, par| {
            let gw = Gateway::new(GenerationCache::open(d.path()).unwrap(), RetryPolicy::no_wait(1));
            run_batch(&gw, &prompts(), &backend, &DecodingParams::default(), par).unwrap()
        };
        let a = run(&d1, 1);
        let b = run(&d2, 8);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
