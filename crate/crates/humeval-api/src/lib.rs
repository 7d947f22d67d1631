//! HTTP API for annotators: fact curation, human composition, and blinded
//! coverage judgments.
//!
//! Every route requires `Authorization: Bearer <token>`; tokens map to
//! annotator ids in the study's `annotators.json`. Responses never carry the
//! backend, configuration or generation key behind a blind label.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use citegen_core::humeval::{
    check_compose_order, CoverageGrid, CurationAction, ExtractionFlag, FactStatus,
    HumanGeneration, Study,
};
use citegen_core::Error;

pub type Shared = Arc<RwLock<Study>>;

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Judgment(_) | Error::InvalidInput(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn not_found(what: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("{what} not found"))
}

fn annotator(study: &Study, headers: &HeaderMap) -> Result<String, ApiError> {
    let token = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or_else(|| ApiError(StatusCode::UNAUTHORIZED, "missing bearer token".into()))?;
    study
        .annotator_for_token(token.trim())
        .map(str::to_string)
        .ok_or_else(|| ApiError(StatusCode::UNAUTHORIZED, "unknown token".into()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub candidates: usize,
    pub facts: usize,
    pub judged_version: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FactView {
    pub fact_id: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateView {
    pub blind_label: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub gold_text: String,
    pub facts: Vec<FactView>,
    /// In presentation order.
    pub candidates: Vec<CandidateView>,
    pub latest: Option<CoverageGrid>,
    pub judged_version: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgmentBody {
    pub covered: CoverageGrid,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JudgmentReceipt {
    pub task_id: String,
    pub version: u32,
    pub submitted_at: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueueFact {
    pub fact_id: String,
    pub text: String,
    pub status: FactStatus,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueueInstance {
    pub instance_id: String,
    pub gold_text: String,
    pub flag: Option<ExtractionFlag>,
    /// Raw extraction output, present only for flagged instances.
    pub raw: Option<String>,
    pub facts: Vec<QueueFact>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FactQueue {
    pub pending: usize,
    pub instances: Vec<QueueInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComposeSummary {
    pub compose_id: String,
    pub step: usize,
    pub done: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComposeView {
    pub compose_id: String,
    pub step: usize,
    pub system_text: String,
    pub user_text: String,
    pub submitted_text: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComposeBody {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Progress {
    pub annotator_id: String,
    pub tasks_total: usize,
    pub tasks_judged: usize,
    pub facts_pending: usize,
    pub facts_flagged: usize,
    pub compose_total: usize,
    pub compose_done: usize,
}

fn latest_for<'a>(study: &'a Study, task_id: &str, who: &str) -> Option<&'a citegen_core::humeval::Judgment> {
    study
        .judgments
        .latest()
        .into_iter()
        .find(|j| j.task_id == task_id && j.annotator_id == who)
}

async fn list_tasks(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Vec<TaskSummary>> {
    let study = s.read().expect("study lock");
    let who = annotator(&study, &headers)?;
    Ok(Json(
        study
            .tasks
            .tasks
            .iter()
            .map(|t| TaskSummary {
                task_id: t.task_id.clone(),
                candidates: t.candidates.len(),
                facts: t.facts.len(),
                judged_version: latest_for(&study, &t.task_id, &who).map(|j| j.version),
            })
            .collect(),
    ))
}

async fn get_task(
    State(s): State<Shared>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<TaskView> {
    let study = s.read().expect("study lock");
    let who = annotator(&study, &headers)?;
    let t = study.tasks.task(&id).ok_or_else(|| not_found("task"))?;
    let latest = latest_for(&study, &id, &who);
    Ok(Json(TaskView {
        task_id: t.task_id.clone(),
        gold_text: t.gold_text.clone(),
        facts: t
            .facts
            .iter()
            .map(|f| FactView {
                fact_id: f.fact_id.clone(),
                text: f.text.clone(),
            })
            .collect(),
        candidates: t
            .candidates
            .iter()
            .map(|c| CandidateView {
                blind_label: c.blind_label.clone(),
                text: c.text.clone(),
            })
            .collect(),
        latest: latest.map(|j| j.covered.clone()),
        judged_version: latest.map(|j| j.version),
    }))
}

async fn post_judgment(
    State(s): State<Shared>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<JudgmentBody>,
) -> Result<(StatusCode, Json<JudgmentReceipt>), ApiError> {
    let mut study = s.write().expect("study lock");
    let who = annotator(&study, &headers)?;
    let task = study.tasks.task(&id).ok_or_else(|| not_found("task"))?.clone();
    let j = study.judgments.submit(&task, &who, body.covered, now())?;
    Ok((
        StatusCode::CREATED,
        Json(JudgmentReceipt {
            task_id: j.task_id,
            version: j.version,
            submitted_at: j.submitted_at,
        }),
    ))
}

fn queue_view(study: &Study) -> FactQueue {
    FactQueue {
        pending: study.facts.pending().len(),
        instances: study
            .facts
            .extractions
            .values()
            .map(|e| QueueInstance {
                instance_id: e.instance_id.clone(),
                gold_text: e.gold_text.clone(),
                flag: e.flag,
                raw: e.flag.map(|_| e.raw.clone()),
                facts: e
                    .facts
                    .iter()
                    .map(|f| QueueFact {
                        fact_id: f.fact_id.clone(),
                        text: f.text.clone(),
                        status: f.status,
                    })
                    .collect(),
            })
            .collect(),
    }
}

async fn get_queue(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<FactQueue> {
    let study = s.read().expect("study lock");
    annotator(&study, &headers)?;
    Ok(Json(queue_view(&study)))
}

async fn post_queue(
    State(s): State<Shared>,
    headers: HeaderMap,
    Json(action): Json<CurationAction>,
) -> ApiResult<QueueFact> {
    let mut study = s.write().expect("study lock");
    annotator(&study, &headers)?;
    let f = study.facts.apply(&action)?;
    study.save_facts()?;
    Ok(Json(QueueFact {
        fact_id: f.fact_id,
        text: f.text,
        status: f.status,
    }))
}

async fn list_compose(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Vec<ComposeSummary>> {
    let study = s.read().expect("study lock");
    let who = annotator(&study, &headers)?;
    Ok(Json(
        study
            .compose
            .iter()
            .map(|c| ComposeSummary {
                compose_id: c.compose_id.clone(),
                step: c.step,
                done: study
                    .human
                    .iter()
                    .any(|h| h.compose_id == c.compose_id && h.annotator_id == who),
            })
            .collect(),
    ))
}

async fn get_compose(
    State(s): State<Shared>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<ComposeView> {
    let study = s.read().expect("study lock");
    let who = annotator(&study, &headers)?;
    let item = study
        .compose
        .iter()
        .find(|c| c.compose_id == id)
        .ok_or_else(|| not_found("compose item"))?;
    check_compose_order(&study.compose, &study.human, &who, &id)
        .map_err(|e| ApiError(StatusCode::CONFLICT, e.to_string()))?;
    Ok(Json(ComposeView {
        compose_id: item.compose_id.clone(),
        step: item.step,
        system_text: item.system_text.clone(),
        user_text: item.user_text.clone(),
        submitted_text: study
            .human
            .iter()
            .rev()
            .find(|h| h.compose_id == id && h.annotator_id == who)
            .map(|h| h.text.clone()),
    }))
}

async fn post_compose(
    State(s): State<Shared>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<ComposeBody>,
) -> Result<StatusCode, ApiError> {
    let mut study = s.write().expect("study lock");
    let who = annotator(&study, &headers)?;
    let item = study
        .compose
        .iter()
        .find(|c| c.compose_id == id)
        .ok_or_else(|| not_found("compose item"))?
        .clone();
    check_compose_order(&study.compose, &study.human, &who, &id)
        .map_err(|e| ApiError(StatusCode::CONFLICT, e.to_string()))?;
    if body.text.trim().is_empty() {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, "text is empty".into()));
    }
    study.add_human(HumanGeneration {
        compose_id: item.compose_id,
        instance_id: item.instance_id,
        config: item.config,
        annotator_id: who,
        text: body.text.trim().to_string(),
        submitted_at: now(),
    })?;
    Ok(StatusCode::CREATED)
}

async fn progress(State(s): State<Shared>, headers: HeaderMap) -> ApiResult<Progress> {
    let study = s.read().expect("study lock");
    let who = annotator(&study, &headers)?;
    let judged: BTreeMap<&str, ()> = study
        .judgments
        .latest()
        .into_iter()
        .filter(|j| j.annotator_id == who)
        .map(|j| (j.task_id.as_str(), ()))
        .collect();
    Ok(Json(Progress {
        tasks_total: study.tasks.tasks.len(),
        tasks_judged: judged.len(),
        facts_pending: study.facts.pending().len(),
        facts_flagged: study.facts.flagged().len(),
        compose_total: study.compose.len(),
        compose_done: study
            .compose
            .iter()
            .filter(|c| study.human.iter().any(|h| h.compose_id == c.compose_id && h.annotator_id == who))
            .count(),
        annotator_id: who,
    }))
}

pub fn router(study: Shared) -> Router {
    Router::new()
        .route("/api/tasks", get(list_tasks))
        .route("/api/tasks/{id}", get(get_task))
        .route("/api/tasks/{id}/judgment", axum::routing::post(post_judgment))
        .route("/api/facts/queue", get(get_queue).post(post_queue))
        .route("/api/compose", get(list_compose))
        .route("/api/compose/{id}", get(get_compose).post(post_compose))
        .route("/api/progress", get(progress))
        .with_state(study)
}

pub fn open(study_dir: &Path) -> citegen_core::Result<Shared> {
    Ok(Arc::new(RwLock::new(Study::open(study_dir)?)))
}

/// Serve until the process is stopped.
pub async fn serve(study_dir: &Path, addr: SocketAddr) -> std::io::Result<()> {
    let state = open(study_dir).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("humeval API listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
