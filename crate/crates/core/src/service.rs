//! HTTP review and query API over a shared engine.
//!
//! Reads run concurrently against the engine. Writes go through a single
//! writer thread fed by a bounded queue; a full queue answers 503.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query as UrlQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, oneshot};
use tower_http::services::ServeDir;

use crate::config::ServerSection;
use crate::dates::Day;
use crate::engine::{DecisionReport, Engine};
use crate::error::Error;
use crate::governance::ReviewDecision;
use crate::model::{NuggetId, View};
use crate::retrieval::{Query, RetrievalResult};

pub const DEFAULT_CONTESTED_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct HttpError {
    status: StatusCode,
    body: ApiError,
}

impl HttpError {
    fn new(status: StatusCode, error: &str, detail: impl Into<String>) -> Self {
        HttpError {
            status,
            body: ApiError {
                error: error.to_string(),
                detail: detail.into(),
            },
        }
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        HttpError::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    fn busy() -> Self {
        HttpError::new(StatusCode::SERVICE_UNAVAILABLE, "busy", "write queue is full; retry later")
    }
}

impl From<Error> for HttpError {
    fn from(e: Error) -> Self {
        let detail = e.to_string();
        match e {
            Error::InvalidInput(_) | Error::Json(_) | Error::DegenerateInterval(_) | Error::KeyUnavailable(_) | Error::UnsupportedMode => {
                HttpError::new(StatusCode::BAD_REQUEST, "bad_request", detail)
            }
            Error::NotFound(_) => HttpError::new(StatusCode::NOT_FOUND, "not_found", detail),
            Error::NoOpenReview(_) => HttpError::new(StatusCode::CONFLICT, "conflict", detail),
            _ => HttpError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail),
        }
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, HttpError>;

type WriteJob = Box<dyn FnOnce(&Engine) + Send>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceOptions {
    pub max_pending_writes: usize,
    pub static_dir: Option<PathBuf>,
}

impl ServiceOptions {
    pub fn from_server(s: &ServerSection) -> Self {
        ServiceOptions {
            max_pending_writes: s.max_pending_writes,
            static_dir: s.static_dir.clone(),
        }
    }
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions::from_server(&ServerSection::default())
    }
}

struct AppState {
    engine: Arc<Engine>,
    writes: mpsc::Sender<WriteJob>,
}

impl AppState {
    /// Queues `f` for the writer and waits for its answer.
    async fn write<T: Send + 'static>(&self, f: impl FnOnce(&Engine) -> T + Send + 'static) -> Result<T, HttpError> {
        let (tx, rx) = oneshot::channel();
        let job: WriteJob = Box::new(move |engine| {
            let _ = tx.send(f(engine));
        });
        self.writes.try_send(job).map_err(|e| match e {
            mpsc::error::TrySendError::Full(_) => HttpError::busy(),
            mpsc::error::TrySendError::Closed(_) => HttpError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "writer stopped"),
        })?;
        rx.await.map_err(|_| HttpError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "writer dropped the request"))
    }
}

fn spawn_writer(engine: Arc<Engine>, capacity: usize) -> mpsc::Sender<WriteJob> {
    let (tx, mut rx) = mpsc::channel::<WriteJob>(capacity.max(1));
    std::thread::Builder::new()
        .name("nuggetindex-writer".into())
        .spawn(move || {
            while let Some(job) = rx.blocking_recv() {
                job(&engine);
            }
        })
        .expect("spawn writer thread");
    tx
}

/// Builds the API router and starts its writer thread.
pub fn router(engine: Arc<Engine>, options: &ServiceOptions) -> Router {
    let writes = spawn_writer(engine.clone(), options.max_pending_writes);
    let state = Arc::new(AppState { engine, writes });
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/stats", get(stats))
        .route("/api/contested", get(contested))
        .route("/api/nuggets/{id}", get(nugget))
        .route("/api/nuggets/{id}/decision", post(decision))
        .route("/api/documents/{doc_id}", get(document))
        .route("/api/query", get(query))
        .with_state(state);
    match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the API on `bind` until the process stops.
pub async fn serve(engine: Arc<Engine>, server: &ServerSection) -> crate::Result<()> {
    let addr: SocketAddr = server
        .bind
        .parse()
        .map_err(|e| Error::Config(format!("bad bind address {:?}: {e}", server.bind)))?;
    let app = router(engine, &ServiceOptions::from_server(server));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok" })
}

async fn stats(State(s): State<Arc<AppState>>) -> Json<crate::engine::Stats> {
    Json(s.engine.stats())
}

async fn contested(State(s): State<Arc<AppState>>, UrlQuery(params): UrlQuery<HashMap<String, String>>) -> ApiResult<Vec<crate::engine::ReviewEntry>> {
    let limit = match params.get("limit") {
        Some(v) => v.parse::<usize>().map_err(|_| HttpError::bad_request(format!("limit must be a non-negative integer: {v:?}")))?,
        None => DEFAULT_CONTESTED_LIMIT,
    };
    Ok(Json(s.engine.open_reviews(limit)))
}

/// An id that does not parse names no nugget, so it is a 404 like any
/// other unknown id.
fn parse_id(raw: &str) -> Result<NuggetId, HttpError> {
    raw.parse()
        .map_err(|_| HttpError::new(StatusCode::NOT_FOUND, "not_found", format!("nugget not found: {raw}")))
}

async fn nugget(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<crate::model::NuggetRecord> {
    let id = parse_id(&id)?;
    s.engine.with_index(|ix| ix.get(id).cloned()).map(Json).ok_or_else(|| Error::NotFound(id).into())
}

async fn document(State(s): State<Arc<AppState>>, Path(doc_id): Path<String>) -> ApiResult<crate::extraction::Document> {
    s.engine
        .document(&doc_id)
        .map(Json)
        .ok_or_else(|| HttpError::new(StatusCode::NOT_FOUND, "not_found", format!("document not found: {doc_id}")))
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    #[serde(flatten)]
    decision: ReviewDecision,
    #[serde(default)]
    note: Option<String>,
    #[serde(default)]
    reviewer: Option<String>,
}

async fn decision(State(s): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<DecisionReport> {
    let id = parse_id(&id)?;
    let body: DecisionBody = serde_json::from_slice(&body).map_err(|e| HttpError::bad_request(format!("malformed decision body: {e}")))?;
    let reviewer = body.reviewer.unwrap_or_else(|| "api".to_string());
    let report = s
        .write(move |engine| engine.apply_review_decision(id, &body.decision, body.note.as_deref(), &reviewer))
        .await??;
    Ok(Json(report))
}

#[derive(Serialize)]
struct QueryResponse {
    #[serde(flatten)]
    result: RetrievalResult,
    context: String,
}

async fn query(State(s): State<Arc<AppState>>, UrlQuery(params): UrlQuery<HashMap<String, String>>) -> ApiResult<QueryResponse> {
    let text = params.get("text").ok_or_else(|| HttpError::bad_request("missing text"))?;
    let at = match params.get("at") {
        Some(v) => v.parse::<Day>().map_err(|e| HttpError::bad_request(format!("bad at: {e}")))?,
        None => Day::today(),
    };
    let mut q = Query::new(text.clone(), at);
    if let Some(v) = params.get("view") {
        q = q.view(v.parse::<View>()?);
    }
    if let Some(v) = params.get("k") {
        q = q.k(v.parse().map_err(|_| HttpError::bad_request(format!("k must be a positive integer: {v:?}")))?);
    }
    let engine = s.engine.clone();
    let out = tokio::task::spawn_blocking(move || -> crate::Result<QueryResponse> {
        let result = engine.retrieve(&q)?;
        let context = engine.format_context(&result);
        Ok(QueryResponse { result, context })
    })
    .await
    .map_err(|e| HttpError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(out))
}
