//! JSON-over-HTTP probe service backing the console.
//!
//! Every error response is `{"error": <code>, "detail": <message>}`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::jobs::JobQueue;
use super::probe::{self, EvalOptions, ProbeError, ProbeSpec};
use super::Engine;
use crate::community::{Community, CommunityLabel};
use crate::eval::{read_report, EvalError};
use crate::promptgen::PromptTemplate;
use crate::survey::{Category, GrammaticalNumber};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: &'static str,
    pub detail: String,
}

impl ApiError {
    pub fn bad_request(detail: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, error: "bad_request", detail: detail.into() }
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, error: "not_found", detail: detail.into() }
    }

    fn internal(detail: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, error: "internal", detail: detail.into() }
    }
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.error.to_string(), detail: self.detail })).into_response()
    }
}

impl From<ProbeError> for ApiError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Validation(d) => ApiError::bad_request(d),
            e @ (ProbeError::Generation { .. } | ProbeError::Classification { .. }) => {
                ApiError { status: StatusCode::BAD_GATEWAY, error: "backend", detail: e.to_string() }
            }
            e => ApiError::internal(e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

pub struct AppState {
    pub engine: Arc<Engine>,
    pub jobs: Arc<JobQueue>,
    /// Probes with more samples are queued as jobs.
    pub sync_probe_limit: usize,
}

impl AppState {
    pub fn new(engine: Arc<Engine>, workers: usize, sync_probe_limit: usize) -> Arc<Self> {
        Arc::new(Self { engine, jobs: JobQueue::new(workers), sync_probe_limit })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/items", get(items))
        .route("/api/probe", post(probe_handler))
        .route("/api/ranking", get(ranking))
        .route("/api/eval", post(eval_handler))
        .route("/api/jobs/:id", get(job))
        .route("/api/reports/:run_id", get(report))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

/// Binds and serves until the process exits.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

#[derive(Serialize, Deserialize)]
pub struct ItemView {
    pub question_id: String,
    pub display_name: String,
    pub prompt_name: String,
    pub category: Category,
    pub grammatical_number: GrammaticalNumber,
    pub dem_rating: f64,
    pub rep_rating: f64,
    pub gold_label: CommunityLabel,
}

async fn items(State(s): State<Arc<AppState>>) -> Result<Json<Vec<ItemView>>, ApiError> {
    s.engine
        .catalog
        .items()
        .iter()
        .map(|i| {
            Ok(ItemView {
                question_id: i.question_id.clone(),
                display_name: i.display_name.clone(),
                prompt_name: i.prompt_name.clone(),
                category: i.category,
                grammatical_number: i.grammatical_number,
                dem_rating: i.dem_rating,
                rep_rating: i.rep_rating,
                gold_label: i.gold_label().map_err(|e| ApiError::internal(e.to_string()))?,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Json)
}

#[derive(Debug, Deserialize)]
pub struct ProbeBody {
    pub subject: String,
    pub template: String,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub context_party: Option<String>,
    /// singular|plural; required for free text.
    pub number: Option<String>,
}

fn parse_template(s: &str) -> Result<PromptTemplate, ApiError> {
    s.parse().map_err(|e: crate::promptgen::ParseTemplateError| ApiError::bad_request(e.to_string()))
}

impl ProbeBody {
    fn into_spec(self, engine: &Engine) -> Result<ProbeSpec, ApiError> {
        Ok(ProbeSpec {
            template: parse_template(&self.template)?,
            n: self.n.unwrap_or(engine.defaults.n_samples),
            seed: self.seed.unwrap_or(engine.defaults.seed),
            context: self.context_party.as_deref().unwrap_or("none").parse().map_err(ApiError::bad_request)?,
            number: self.number.as_deref().map(str::parse).transpose().map_err(ApiError::bad_request)?,
            subject: self.subject,
        })
    }
}

#[derive(Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: String,
    pub state: super::JobState,
}

fn accepted(s: &AppState, id: String) -> Response {
    let state = s.jobs.get(&id).map(|j| j.state).unwrap_or(super::JobState::Queued);
    (StatusCode::ACCEPTED, Json(JobAccepted { job_id: id, state })).into_response()
}

async fn probe_handler(
    State(s): State<Arc<AppState>>,
    body: Result<Json<ProbeBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body?;
    let spec = body.into_spec(&s.engine)?;
    if spec.n <= s.sync_probe_limit {
        let result = probe::probe(&s.engine, &spec).await?;
        return Ok(Json(result).into_response());
    }
    probe::validate_spec(&s.engine, &spec)?;
    let engine = Arc::clone(&s.engine);
    let id = s.jobs.submit("probe", async move {
        let r = probe::probe(&engine, &spec).await.map_err(|e| e.to_string())?;
        serde_json::to_value(r).map_err(|e| e.to_string())
    });
    Ok(accepted(&s, id))
}

#[derive(Debug, Deserialize)]
pub struct RankingQuery {
    pub community: String,
    pub template: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

async fn ranking(
    State(s): State<Arc<AppState>>,
    q: Result<Query<RankingQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = q?;
    let community: Community = q.community.parse().map_err(|e: crate::community::ParseCommunityError| {
        ApiError::bad_request(e.to_string())
    })?;
    let template = match q.template.as_deref() {
        Some(t) => parse_template(t)?,
        None => s.engine.defaults.template,
    };
    let n = q.n.unwrap_or(s.engine.defaults.n_samples);
    if n == 0 {
        return Err(ApiError::bad_request("n must be at least 1"));
    }
    let r = probe::rank(&s.engine, community, template, n, q.seed.unwrap_or(s.engine.defaults.seed)).await?;
    Ok(Json(r).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct EvalBody {
    pub template: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
}

#[derive(Serialize)]
struct EvalJobResult {
    run_ids: Vec<String>,
    reports: Vec<crate::eval::EvalReport>,
    aggregate: crate::eval::RunAggregate,
}

async fn eval_handler(
    State(s): State<Arc<AppState>>,
    body: axum::body::Bytes,
) -> Result<Response, ApiError> {
    // an empty body means "all defaults"
    let body: EvalBody = if body.iter().all(u8::is_ascii_whitespace) {
        EvalBody::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let mut options = EvalOptions::from_defaults(&s.engine);
    if let Some(t) = body.template.as_deref() {
        options.template = parse_template(t)?;
    }
    options.n = body.n.unwrap_or(options.n);
    options.seed = body.seed.unwrap_or(options.seed);
    options.runs = body.runs.unwrap_or(1);
    if options.n == 0 || options.runs == 0 {
        return Err(ApiError::bad_request("n and runs must be at least 1"));
    }
    let engine = Arc::clone(&s.engine);
    let id = s.jobs.submit("eval", async move {
        let (reports, aggregate) = probe::run_evals(&engine, &options).await.map_err(|e| e.to_string())?;
        let result = EvalJobResult { run_ids: reports.iter().map(|r| r.run_id.clone()).collect(), reports, aggregate };
        serde_json::to_value(result).map_err(|e| e.to_string())
    });
    Ok(accepted(&s, id))
}

async fn job(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    s.jobs.get(&id).map(|j| Json(j).into_response()).ok_or_else(|| ApiError::not_found(format!("no job {id}")))
}

async fn report(State(s): State<Arc<AppState>>, Path(run_id): Path<String>) -> Result<Response, ApiError> {
    let safe = !run_id.is_empty() && run_id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !run_id.starts_with('.');
    if !safe {
        return Err(ApiError::bad_request(format!("invalid run id {run_id:?}")));
    }
    match read_report(&s.engine.runs_dir, &run_id) {
        Ok(r) => Ok(Json(r).into_response()),
        Err(EvalError::Io { path, .. }) if !path.exists() => Err(ApiError::not_found(format!("no report for {run_id}"))),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}
