//! HTTP front end for [`Service`].
//!
//! | method | path                      | body / query        |
//! |--------|---------------------------|---------------------|
//! | GET    | `/v1/state`               |                     |
//! | POST   | `/v1/commands`            | JSON `Command`      |
//! | GET    | `/v1/events`              | `?from=N`, JSON     |
//! | GET    | `/v1/events/stream`       | `?from=N`, SSE      |
//! | PUT    | `/v1/jobs/{name}`         | job file text       |
//! | PUT    | `/v1/scenarios/{name}`    | scenario file text  |
//! | GET    | `/v1/catalog`             |                     |
//! | GET    | `/v1/runs/current/log`    | JSON lines          |

use std::convert::Infallible;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use cellsched::api::{ApiError, Command, Service};
use cellsched::eventlog::{LogError, WireEvent};
use futures::stream::{self, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::watch;

#[derive(Clone)]
pub struct AppState {
    service: Arc<Mutex<Service>>,
    /// Number of log entries after the last tick; wakes event streams.
    progress: watch::Sender<usize>,
}

impl AppState {
    pub fn new(service: Service) -> Self {
        let (progress, _) = watch::channel(0);
        Self { service: Arc::new(Mutex::new(service)), progress }
    }

    pub fn lock(&self) -> MutexGuard<'_, Service> {
        self.service.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Advances the live run one tick and wakes subscribers.
    pub fn tick(&self) -> Result<(), ApiError> {
        let mut service = self.lock();
        if service.tick()? > 0 {
            let len = service.stream_events(0).map(|e| e.len()).unwrap_or(0);
            self.progress.send_replace(len);
        }
        Ok(())
    }

    fn notify(&self) {
        let len = self.lock().stream_events(0).map(|e| e.len()).unwrap_or(0);
        self.progress.send_replace(len);
    }
}

/// Ticks the service every `interval` until the process exits.
pub async fn drive(state: AppState, interval: Duration) {
    let mut timer = tokio::time::interval(interval);
    timer.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        timer.tick().await;
        if let Err(e) = state.tick() {
            tracing::error!(error = %e, "run aborted");
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/state", get(get_state))
        .route("/v1/commands", post(post_command))
        .route("/v1/events", get(get_events))
        .route("/v1/events/stream", get(stream_events))
        .route("/v1/jobs/{name}", put(put_job))
        .route("/v1/scenarios/{name}", put(put_scenario))
        .route("/v1/catalog", get(catalog))
        .route("/v1/runs/current/log", get(download_log))
        .with_state(state)
}

fn error(status: StatusCode, code: &str, message: impl ToString) -> Response {
    (status, Json(json!({ "error": code, "message": message.to_string() }))).into_response()
}

fn api_error(e: ApiError) -> Response {
    match e {
        ApiError::NotFound => error(StatusCode::NOT_FOUND, "not_found", e),
        ApiError::Log(LogError::Range { .. }) => error(StatusCode::BAD_REQUEST, "out_of_range", e),
        ApiError::Upload(_) => error(StatusCode::BAD_REQUEST, "invalid_upload", e),
        e => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e),
    }
}

async fn get_state(State(state): State<AppState>) -> Response {
    match state.lock().get_state() {
        Ok(s) => Json(s).into_response(),
        Err(e) => api_error(e),
    }
}

async fn post_command(State(state): State<AppState>, body: Bytes) -> Response {
    let command: Command = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, "protocol", e),
    };
    let ack = state.lock().post_command(command);
    match ack {
        Ok(ack) => {
            state.notify();
            Json(ack).into_response()
        }
        Err(e) => api_error(e),
    }
}

#[derive(Debug, Deserialize)]
struct From {
    #[serde(default)]
    from: i64,
}

async fn get_events(State(state): State<AppState>, Query(q): Query<From>) -> Response {
    match state.lock().stream_events(q.from) {
        Ok(events) => Json(events).into_response(),
        Err(e) => api_error(e),
    }
}

fn sse_event(e: &WireEvent) -> Event {
    Event::default().id(e.seq.to_string()).data(e.to_line())
}

async fn stream_events(State(state): State<AppState>, Query(q): Query<From>) -> Response {
    // Validate the cursor up front so a bad request gets a status code.
    if let Err(e) = state.lock().stream_events(q.from) {
        return api_error(e);
    }
    let progress = state.progress.subscribe();
    let events = stream::unfold((state, progress, q.from), |(state, mut progress, cursor)| async move {
        loop {
            let batch = state.lock().stream_events(cursor);
            match batch {
                Ok(batch) if !batch.is_empty() => {
                    let next = cursor + batch.len() as i64;
                    return Some((batch, (state, progress, next)));
                }
                Ok(_) => {}
                // The run was replaced; end the stream.
                Err(_) => return None,
            }
            if progress.changed().await.is_err() {
                return None;
            }
        }
    })
    .flat_map(|batch| stream::iter(batch.into_iter().map(|e| Ok::<_, Infallible>(sse_event(&e)))));
    Sse::new(events).keep_alive(KeepAlive::default()).into_response()
}

async fn put_job(State(state): State<AppState>, Path(name): Path<String>, body: String) -> Response {
    match state.lock().upload_job(&name, &body) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => api_error(e),
    }
}

async fn put_scenario(State(state): State<AppState>, Path(name): Path<String>, body: String) -> Response {
    match state.lock().upload_scenario(&name, &body) {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => api_error(e),
    }
}

async fn catalog(State(state): State<AppState>) -> Response {
    let service = state.lock();
    let jobs: Vec<&str> = service.job_names().collect();
    let scenarios: Vec<&str> = service.scenario_names().collect();
    Json(json!({ "jobs": jobs, "scenarios": scenarios })).into_response()
}

async fn download_log(State(state): State<AppState>) -> Response {
    match state.lock().run_log() {
        Ok(text) => ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response(),
        Err(e) => api_error(e),
    }
}
