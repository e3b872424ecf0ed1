use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::{LogEvent, ServiceConfig, Store};
use crate::error::Error;
use crate::ratings::{RatingRecord, TaskKind};

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
    tokens: Arc<Vec<(String, String)>>,
    admin_token: Arc<String>,
}

impl AppState {
    pub fn new(store: Store, cfg: &ServiceConfig) -> Self {
        AppState {
            store: Arc::new(Mutex::new(store)),
            tokens: Arc::new(cfg.raters.iter().map(|r| (r.id.clone(), r.token.clone())).collect()),
            admin_token: Arc::new(cfg.admin_token.clone()),
        }
    }

    fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        // a panic while holding the lock cannot leave the state half-applied
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Unauthorized(_) => (StatusCode::UNAUTHORIZED, "unauthorized"),
            Error::Duplicate(_) => (StatusCode::CONFLICT, "duplicate"),
            Error::Validation(_) | Error::InvalidInput(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ")
}

fn authorize_rater(app: &AppState, headers: &HeaderMap, rater: &str) -> ApiResult<()> {
    let token = bearer(headers).ok_or_else(|| Error::Unauthorized("missing bearer token".into()))?;
    match app.tokens.iter().find(|(id, _)| id == rater) {
        Some((_, t)) if t == token => Ok(()),
        Some(_) => Err(Error::Unauthorized(format!("token does not belong to rater `{rater}`")).into()),
        None if token == app.admin_token.as_str() => Ok(()),
        None => Err(Error::NotFound(format!("unknown rater `{rater}`")).into()),
    }
}

fn authorize_admin(app: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    if bearer(headers) == Some(app.admin_token.as_str()) {
        Ok(())
    } else {
        Err(Error::Unauthorized("admin token required".into()).into())
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

async fn next_task(State(app): State<AppState>, Path(rater): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    authorize_rater(&app, &headers, &rater)?;
    let task = app.store().state.next_task(&rater)?;
    Ok(Json(task).into_response())
}

async fn progress(State(app): State<AppState>, Path(rater): Path<String>, headers: HeaderMap) -> ApiResult<Response> {
    authorize_rater(&app, &headers, &rater)?;
    let p = app.store().state.progress(&rater)?;
    Ok(Json(p).into_response())
}

async fn submit_rating(State(app): State<AppState>, headers: HeaderMap, Json(record): Json<RatingRecord>) -> ApiResult<Response> {
    authorize_rater(&app, &headers, &record.rater_id)?;
    let rater = record.rater_id.clone();
    let mut store = app.store();
    store.submit(LogEvent::Rating(record))?;
    let p = store.state.progress(&rater)?;
    Ok(Json(json!({ "accepted": true, "progress": p })).into_response())
}

#[derive(Deserialize)]
struct DifficultyBody {
    score: u8,
    #[serde(default)]
    timestamp: Option<u64>,
}

async fn difficulty(
    State(app): State<AppState>,
    Path(rater): Path<String>,
    headers: HeaderMap,
    Json(body): Json<DifficultyBody>,
) -> ApiResult<Response> {
    authorize_rater(&app, &headers, &rater)?;
    let ev = LogEvent::Difficulty { rater_id: rater, score: body.score, timestamp: body.timestamp.unwrap_or_else(now_ms) };
    app.store().submit(ev)?;
    Ok(Json(json!({ "accepted": true })).into_response())
}

#[derive(Deserialize)]
struct MatrixQuery {
    task: TaskKind,
}

async fn export_matrix(State(app): State<AppState>, headers: HeaderMap, Query(q): Query<MatrixQuery>) -> ApiResult<Response> {
    authorize_admin(&app, &headers)?;
    let m = app.store().state.export_matrix(q.task)?;
    Ok(Json(m).into_response())
}

async fn export_log(State(app): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    authorize_admin(&app, &headers)?;
    let log = app.store().state.export_feedback_log()?;
    let mut body = Vec::new();
    log.write_jsonl(&mut body)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn not_found() -> ApiError {
    ApiError(Error::NotFound("no such endpoint".into()))
}

pub fn router(app: AppState, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/api/session/:rater/next", get(next_task))
        .route("/api/session/:rater/progress", get(progress))
        .route("/api/session/:rater/difficulty", post(difficulty))
        .route("/api/ratings", post(submit_rating))
        .route("/api/export/matrix", get(export_matrix))
        .route("/api/export/log", get(export_log))
        .route("/api/*rest", get(not_found).post(not_found))
        .with_state(app);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Opens the store from `cfg` and serves until ctrl-c.
pub async fn serve(cfg: ServiceConfig) -> crate::Result<()> {
    let store = Store::open(cfg.build_state()?, &cfg.log_path)?;
    let app = router(AppState::new(store, &cfg), cfg.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "feedback service listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
