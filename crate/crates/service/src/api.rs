//! HTTP routes.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /api/tasks` | submit a [`TaskSpec`] (JSON, at most 1 MiB) |
//! | `GET /api/tasks/{id}` | task status |
//! | `GET /api/tasks/{id}/result` | result document (JSON) |
//! | `GET /api/tasks/{id}/result.csv` | result table (CSV) |
//! | `GET /api/device` | the device document in use |
//! | `GET /agent/tasks/next?wait=S` | agent long-poll |
//! | `POST /agent/tasks/{id}/result` | agent report |
//!
//! Anything else is served from the static directory when one is configured.

use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use scq_core::protocol::{AgentReport, AgentTask, ErrorBody, SubmitAccepted, SubmitRejected, TaskStatus};
use scq_core::qasm;
use scq_core::task::{self, render_csv, TaskSpec};
use scq_core::DeviceSpec;
use serde::Deserialize;
use tokio::sync::Notify;
use tokio::time::Instant;
use tower_http::services::ServeDir;

use crate::config::ServiceConfig;
use crate::store::{Store, StoreError};

pub const SUBMIT_LIMIT: usize = 1 << 20;
const REPORT_LIMIT: usize = 256 << 20;

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub struct AppState {
    pub store: Mutex<Store>,
    pub notify: Notify,
    pub device: DeviceSpec,
    pub agent_token: String,
    pub user_token: Option<String>,
    pub lease_ms: u64,
    pub max_wait: Duration,
}

impl AppState {
    pub fn new(store: Store, device: DeviceSpec, config: &ServiceConfig, agent_token: String) -> Self {
        Self {
            store: Mutex::new(store),
            notify: Notify::new(),
            device,
            agent_token,
            user_token: config.user_token.clone(),
            lease_ms: config.lease_seconds.saturating_mul(1000),
            max_wait: Duration::from_secs(config.max_wait_seconds),
        }
    }

    fn store(&self) -> MutexGuard<'_, Store> {
        // A panic while holding the lock cannot leave the log half-applied:
        // events are applied only after they are durable.
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: message.into(),
            status: None,
        }),
    )
        .into_response()
}

fn store_error(e: StoreError) -> Response {
    match e {
        StoreError::NotFound(_) => error(StatusCode::NOT_FOUND, e.to_string()),
        StoreError::LeaseMismatch { .. } | StoreError::Conflict(_) => error(StatusCode::CONFLICT, e.to_string()),
        StoreError::Io(_) | StoreError::Corrupt { .. } => {
            tracing::error!("storage failure: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
}

/// The 401 answer when a user token is configured and not presented.
fn deny_user(state: &AppState, headers: &HeaderMap) -> Option<Response> {
    match &state.user_token {
        Some(t) if bearer(headers) != Some(t.as_str()) => Some(error(StatusCode::UNAUTHORIZED, "missing or wrong bearer token")),
        _ => None,
    }
}

fn deny_agent(state: &AppState, headers: &HeaderMap) -> Option<Response> {
    (bearer(headers) != Some(state.agent_token.as_str()))
        .then(|| error(StatusCode::UNAUTHORIZED, "missing or wrong agent token"))
}

async fn submit(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    if let Some(r) = deny_user(&state, &headers) {
        return r;
    }
    let spec: TaskSpec = match serde_json::from_slice(&body) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON body: {e}")),
    };
    let circuit = match task::check(&spec, &state.device) {
        Ok(c) => c,
        Err(errors) => return (StatusCode::UNPROCESSABLE_ENTITY, Json(SubmitRejected { errors })).into_response(),
    };
    let canonical = TaskSpec {
        source: qasm::serialize(&circuit),
        ..spec
    };
    let id = uuid::Uuid::new_v4().to_string();
    let res = state.store().submit(id, canonical, now_ms());
    match res {
        Ok(record) => {
            state.notify.notify_waiters();
            (
                StatusCode::ACCEPTED,
                Json(SubmitAccepted {
                    id: record.id,
                    status: record.status,
                }),
            )
                .into_response()
        }
        Err(e) => store_error(e),
    }
}

async fn get_task(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    if let Some(r) = deny_user(&state, &headers) {
        return r;
    }
    let store = state.store();
    match store.get(&id) {
        Some(t) => Json(t.view()).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown task {id}")),
    }
}

fn not_ready(status: TaskStatus, detail: Option<&str>) -> Response {
    let message = match (status, detail) {
        (TaskStatus::Failed, Some(d)) => format!("task failed: {d}"),
        _ => format!("result not ready (task is {status:?})").to_lowercase(),
    };
    (
        StatusCode::CONFLICT,
        Json(ErrorBody {
            error: message,
            status: Some(status),
        }),
    )
        .into_response()
}

enum ResultForm {
    Json,
    Csv,
}

fn result_response(state: &AppState, id: &str, form: ResultForm) -> Response {
    let store = state.store();
    let Some(t) = store.get(id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown task {id}"));
    };
    if t.status != TaskStatus::Done {
        return not_ready(t.status, t.error.as_deref());
    }
    match form {
        ResultForm::Json => match store.result_bytes(id) {
            Ok(Some(bytes)) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
            Ok(None) => not_ready(t.status, None),
            Err(e) => store_error(e),
        },
        ResultForm::Csv => match store.result(id) {
            Ok(Some(doc)) => (
                [
                    (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
                    (
                        header::CONTENT_DISPOSITION,
                        format!("attachment; filename=\"{id}.csv\""),
                    ),
                ],
                render_csv(&doc),
            )
                .into_response(),
            Ok(None) => not_ready(t.status, None),
            Err(e) => store_error(e),
        },
    }
}

async fn get_result(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    if let Some(r) = deny_user(&state, &headers) {
        return r;
    }
    result_response(&state, &id, ResultForm::Json)
}

async fn get_result_csv(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Response {
    if let Some(r) = deny_user(&state, &headers) {
        return r;
    }
    result_response(&state, &id, ResultForm::Csv)
}

async fn get_device(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    if let Some(r) = deny_user(&state, &headers) {
        return r;
    }
    Json(state.device.clone()).into_response()
}

#[derive(Deserialize)]
struct NextQuery {
    #[serde(default)]
    wait: f64,
}

async fn agent_next(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<NextQuery>,
) -> Response {
    if let Some(r) = deny_agent(&state, &headers) {
        return r;
    }
    let wait = if q.wait.is_finite() && q.wait > 0.0 {
        Duration::from_secs_f64(q.wait).min(state.max_wait)
    } else {
        Duration::ZERO
    };
    let deadline = Instant::now() + wait;
    loop {
        let notified = state.notify.notified();
        tokio::pin!(notified);
        notified.as_mut().enable();
        let (leased, expiry) = {
            let mut store = state.store();
            let now = now_ms();
            match store.lease_next(now, state.lease_ms, uuid::Uuid::new_v4().to_string()) {
                Ok(t) => (t, store.next_expiry().map(|e| e.saturating_sub(now))),
                Err(e) => return store_error(e),
            }
        };
        if let Some(t) = leased {
            let lease = t.lease.expect("leased task carries its lease");
            return Json(AgentTask {
                task_id: t.id,
                lease_id: lease.lease_id,
                lease_expires_at: lease.expires_at,
                spec: t.spec,
            })
            .into_response();
        }
        let now = Instant::now();
        if now >= deadline {
            return StatusCode::NO_CONTENT.into_response();
        }
        let mut wake = deadline;
        if let Some(ms) = expiry {
            wake = wake.min(now + Duration::from_millis(ms.max(1)));
        }
        tokio::select! {
            _ = &mut notified => {}
            _ = tokio::time::sleep_until(wake) => {}
        }
    }
}

async fn agent_report(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> Response {
    if let Some(r) = deny_agent(&state, &headers) {
        return r;
    }
    let report: AgentReport = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid report: {e}")),
    };
    let res = state.store().finish(&id, &report.lease_id, &report.outcome, now_ms());
    match res {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => store_error(e),
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/api/tasks", post(submit))
        .route("/api/tasks/{id}", get(get_task))
        .route("/api/tasks/{id}/result", get(get_result))
        .route("/api/tasks/{id}/result.csv", get(get_result_csv))
        .route("/api/device", get(get_device))
        .layer(DefaultBodyLimit::max(SUBMIT_LIMIT));
    let agent = Router::new()
        .route("/agent/tasks/next", get(agent_next))
        .route("/agent/tasks/{id}/result", post(agent_report))
        .layer(DefaultBodyLimit::max(REPORT_LIMIT));
    let app = api.merge(agent).with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}
