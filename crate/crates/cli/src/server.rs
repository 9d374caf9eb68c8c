//! HTTP front end of the rating service plus static hosting of the web
//! rater assets.

use std::collections::HashMap;
use std::future::Future;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;
use sonar_complexity::elo::Outcome;
use sonar_complexity::metrics;
use sonar_complexity::rating::{LineError, RatingService, ServiceConfig, ServiceError};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::config::ServeConfig;
use crate::error::{CliError, Result};

pub struct AppState {
    service: Mutex<RatingService>,
    previews: HashMap<String, Bytes>,
}

impl AppState {
    pub fn service(&self) -> std::sync::MutexGuard<'_, RatingService> {
        self.service.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Loads the dataset, renders every chip once, and restores the service
/// from its log. Also returns the malformed log lines that were skipped.
pub fn build_state(cfg: &ServeConfig, drc_epsilon: f64) -> Result<(Arc<AppState>, Vec<LineError>)> {
    let root = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| CliError::Usage("serve needs a dataset (--dataset or SONAR_DATASET)".into()))?;
    let report = sonar_complexity::dataset::load_dataset(root)?;
    for r in &report.rejected {
        let codes: Vec<&str> = r.reasons.iter().map(|x| x.code()).collect();
        tracing::warn!(id = %r.id, reasons = %codes.join(","), "chip rejected");
    }
    let previews = report
        .accepted
        .par_iter()
        .map(|c| {
            metrics::drc_preview_png(&c.image, drc_epsilon)
                .map(|png| (c.id.clone(), Bytes::from(png)))
                .map_err(|e| CliError::Data(format!("cannot render {}: {e}", c.id)))
        })
        .collect::<Result<HashMap<_, _>>>()?;
    let service_cfg = ServiceConfig {
        p_repeat: cfg.p_repeat,
        seed: cfg.seed,
    };
    let (service, skipped) = RatingService::open(report.ids(), &cfg.log, service_cfg).map_err(|e| match e {
        ServiceError::InvalidArgument(m) => CliError::Usage(m),
        other => CliError::Runtime(other.to_string()),
    })?;
    Ok((
        Arc::new(AppState {
            service: Mutex::new(service),
            previews,
        }),
        skipped,
    ))
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/pair", get(next_pair))
        .route("/api/judgment", post(record_judgment))
        .route("/api/images/{id}", get(image))
        .route("/api/stats", get(stats))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX) })),
    };
    app.layer(TraceLayer::new_for_http())
}

const INDEX: &str = "<!doctype html><title>rating service</title>\
<p>API: <code>GET /api/pair?operator=NAME</code>, <code>POST /api/judgment</code>, \
<code>GET /api/images/ID</code>, <code>GET /api/stats</code>. \
Set <code>static_dir</code> to serve the rater UI here.</p>";

/// Serves until `shutdown` resolves. Judgments are flushed to disk as
/// they are acknowledged, so the log is complete whenever this returns.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| CliError::Runtime(format!("server error: {e}")))
}

/// Resolves on ctrl-c or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn error(status: StatusCode, code: &str, detail: impl Into<String>) -> Response {
    (status, Json(json!({"error": code, "detail": detail.into()}))).into_response()
}

fn service_error(e: ServiceError) -> Response {
    match e {
        ServiceError::Conflict(m) => error(StatusCode::CONFLICT, "conflict", m),
        ServiceError::InvalidArgument(m) => error(StatusCode::BAD_REQUEST, "invalid_argument", m),
        ServiceError::Unavailable(m) => error(StatusCode::SERVICE_UNAVAILABLE, "unavailable", m),
        ServiceError::Io(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "log_io", e.to_string()),
    }
}

#[derive(Deserialize)]
struct PairQuery {
    operator: Option<String>,
}

async fn next_pair(State(state): State<Arc<AppState>>, Query(q): Query<PairQuery>) -> Response {
    let Some(operator) = q.operator.filter(|o| !o.trim().is_empty()) else {
        return error(StatusCode::BAD_REQUEST, "invalid_argument", "missing `operator` query parameter");
    };
    let pair = state.service().next_pair(&operator);
    match pair {
        Ok(p) => Json(json!({
            "comparison_id": p.comparison_id,
            "left_url": format!("/api/images/{}", p.left),
            "right_url": format!("/api/images/{}", p.right),
        }))
        .into_response(),
        Err(e) => service_error(e),
    }
}

async fn record_judgment(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let parsed: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, "invalid_argument", format!("body is not JSON: {e}")),
    };
    let Some(id) = parsed.get("comparison_id").and_then(|v| v.as_str()).map(str::to_owned) else {
        return error(StatusCode::BAD_REQUEST, "invalid_argument", "missing string field `comparison_id`");
    };
    let outcome = match parsed.get("outcome").and_then(|v| v.as_str()).map(Outcome::from_str) {
        Some(Ok(o)) => o,
        _ => {
            return error(
                StatusCode::BAD_REQUEST,
                "invalid_argument",
                "`outcome` must be one of LEFT, RIGHT, NEUTRAL",
            )
        }
    };
    // the append syncs to disk; keep it off the async workers
    let result = tokio::task::spawn_blocking(move || state.service().record_judgment(&id, outcome)).await;
    match result {
        Ok(Ok(ack)) => Json(ack).into_response(),
        Ok(Err(e)) => service_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

async fn image(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match state.previews.get(&id) {
        Some(png) => ([(header::CONTENT_TYPE, "image/png")], png.clone()).into_response(),
        None => error(StatusCode::NOT_FOUND, "not_found", format!("no image `{id}`")),
    }
}

async fn stats(State(state): State<Arc<AppState>>) -> Response {
    let stats = state.service().progress_stats();
    Json(stats).into_response()
}
