use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Upstream,
    Incomplete,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("no instance survived ingestion ({raw} raw records)")]
    EmptyCorpus { raw: usize },

    #[error("invalid configuration string {spec:?}: {reason}")]
    ConfigSpec { spec: String, reason: String },

    #[error("template error: {0}")]
    Template(String),

    #[error("missing input component for {instance_id}: {component}")]
    MissingComponent {
        instance_id: String,
        component: &'static str,
    },

    #[error("invalid intent for {instance_id}: {reason}")]
    InvalidIntent { instance_id: String, reason: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("backend {backend_id} failed after {attempts} attempt(s): {message}")]
    Backend {
        backend_id: String,
        attempts: u32,
        message: String,
    },

    #[error("malformed response from {backend_id}: {reason}")]
    MalformedResponse {
        backend_id: String,
        reason: String,
        raw: String,
    },

    #[error("cache error: {0}")]
    Cache(String),

    #[error("scorer sidecar unavailable: {0}")]
    ScorerUnavailable(String),

    #[error("scorer protocol mismatch: client speaks {expected}, sidecar reports {found}")]
    ProtocolMismatch { expected: String, found: String },

    #[error("invalid scorer response: {0}")]
    ScorerResponse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("measurement grid is ragged; missing cells: {}", format_cells(.missing))]
    RaggedGrid { missing: Vec<(String, String)> },

    #[error("judgment error: {0}")]
    Judgment(String),

    #[error("run incomplete: {failed} of {total} cells failed")]
    IncompleteRun { failed: usize, total: usize },

    #[error("missing stage artifact {path}: run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("provenance mismatch: {0}")]
    Provenance(String),
}

fn format_cells(cells: &[(String, String)]) -> String {
    let shown: Vec<String> = cells
        .iter()
        .take(10)
        .map(|(cfg, inst)| format!("{cfg}/{inst}"))
        .collect();
    if cells.len() > shown.len() {
        format!("{} (+{} more)", shown.join(", "), cells.len() - shown.len())
    } else {
        shown.join(", ")
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Read { .. } | Error::Write { .. } => ErrorClass::Io,
            Error::Backend { .. }
            | Error::MalformedResponse { .. }
            | Error::ScorerUnavailable(_)
            | Error::ScorerResponse(_)
            | Error::ProtocolMismatch { .. } => ErrorClass::Upstream,
            Error::IncompleteRun { .. } => ErrorClass::Incomplete,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
