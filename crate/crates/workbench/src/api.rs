//! HTTP JSON API over [`AnnotationService`].
//!
//! Mutations take the write lock, so submissions are applied one at a time
//! in log order; reads share the read lock.

use crate::service::{AnnotationService, AnnotationSubmission, AnnotationTask, ServiceError};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

pub type SharedService = Arc<RwLock<AnnotationService>>;

#[derive(Clone)]
struct AppState {
    service: SharedService,
    static_dir: Option<Arc<PathBuf>>,
}

#[derive(Debug, Deserialize)]
pub struct AnnotatorQuery {
    pub annotator: String,
}

/// Reply of `GET /api/task`: the next task, or `done` once all are answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReply {
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<AnnotationTask>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            ServiceError::UnknownAnnotator(_) => (StatusCode::NOT_FOUND, "UnknownAnnotator"),
            ServiceError::UnknownTask(_) => (StatusCode::NOT_FOUND, "UnknownTask"),
            ServiceError::NotAssigned { .. } => (StatusCode::FORBIDDEN, "NotAssigned"),
            ServiceError::ValidationFailure(_) => (StatusCode::BAD_REQUEST, "ValidationFailure"),
            ServiceError::NoAnnotators | ServiceError::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "InvalidArgument"),
            ServiceError::Log { .. } | ServiceError::Io { .. } => {
                log::error!("{}", self.0);
                (StatusCode::INTERNAL_SERVER_ERROR, "LogFailure")
            }
        };
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

fn read(service: &SharedService) -> std::sync::RwLockReadGuard<'_, AnnotationService> {
    service.read().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn task(State(s): State<AppState>, Query(q): Query<AnnotatorQuery>) -> Result<Json<TaskReply>, ApiError> {
    let service = read(&s.service);
    let task = service.next_task(&q.annotator)?.cloned();
    Ok(Json(TaskReply { done: task.is_none(), task }))
}

async fn submit(State(s): State<AppState>, Json(submission): Json<AnnotationSubmission>) -> Result<impl IntoResponse, ApiError> {
    let mut service = s.service.write().unwrap_or_else(|poisoned| poisoned.into_inner());
    Ok(Json(service.submit(submission)?))
}

async fn progress(State(s): State<AppState>, Query(q): Query<AnnotatorQuery>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(read(&s.service).progress(&q.annotator)?))
}

async fn health(State(s): State<AppState>) -> impl IntoResponse {
    let service = read(&s.service);
    Json(json!({
        "status": "ok",
        "records": service.record_count(),
        "tasks": service.task_count(),
        "annotators": service.annotators().collect::<Vec<_>>(),
        "log_length": service.log_length(),
    }))
}

async fn record(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match read(&s.service).record(&id) {
        Some(r) => Json(r).into_response(),
        None => (StatusCode::NOT_FOUND, Json(json!({ "error": "UnknownRecord", "message": format!("unknown record {id:?}") }))).into_response(),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

/// Serves built frontend assets; `/` maps to `index.html`. Paths that try
/// to leave the directory are not found.
async fn static_file(State(s): State<AppState>, uri: Uri) -> Response {
    let not_found = || (StatusCode::NOT_FOUND, "not found").into_response();
    let Some(root) = s.static_dir else { return not_found() };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return not_found();
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => not_found(),
    }
}

pub fn router(service: SharedService, static_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        service,
        static_dir: static_dir.map(Arc::new),
    };
    Router::new()
        .route("/api/task", get(task))
        .route("/api/submit", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/health", get(health))
        .route("/api/record/{id}", get(record))
        .fallback(static_file)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, service: SharedService, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::testing::{annotators, records, submission};
    use crate::service::create_tasks;
    use axum::body::{to_bytes, Body};
    use axum::http::Request;
    use serde_json::Value;
    use tower::ServiceExt;

    fn app() -> (Router, SharedService) {
        let recs = records(6);
        let tasks = create_tasks(&recs, 0.0, &annotators(&["ann1", "ann2"]), 1).unwrap();
        let service = Arc::new(RwLock::new(AnnotationService::in_memory(recs, tasks).unwrap()));
        (router(Arc::clone(&service), None), service)
    }

    async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
        let res = app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = to_bytes(res.into_body(), 1 << 20).await.unwrap();
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    fn get_req(uri: &str) -> Request<Body> {
        Request::get(uri).body(Body::empty()).unwrap()
    }

    fn post_req(body: &impl Serialize) -> Request<Body> {
        Request::post("/api/submit")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(serde_json::to_vec(body).unwrap()))
            .unwrap()
    }

    #[tokio::test]
    async fn error_statuses() {
        let (app, _) = app();
        assert_eq!(call(&app, get_req("/api/task?annotator=ghost")).await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&app, get_req("/api/progress?annotator=ghost")).await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&app, get_req("/api/record/nope")).await.0, StatusCode::NOT_FOUND);
        let (_, task) = call(&app, get_req("/api/task?annotator=ann1")).await;
        let id = task["task"]["task_id"].as_str().unwrap();
        let (status, body) = call(&app, post_req(&submission(id, "ann1", "White", "Great"))).await;
        assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("ValidationFailure")));
        assert_eq!(call(&app, post_req(&submission(id, "ann2", "White", "Positive"))).await.0, StatusCode::FORBIDDEN);
        assert_eq!(call(&app, post_req(&submission("zzz", "ann1", "White", "Positive"))).await.0, StatusCode::NOT_FOUND);
        assert_eq!(call(&app, get_req("/index.html")).await.0, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn concurrent_submissions_are_serialized() {
        let (app, service) = app();
        let mut handles = Vec::new();
        for a in ["ann1", "ann2"] {
            let ids: Vec<String> = {
                let s = service.read().unwrap();
                (0..6).map(|i| format!("r{i:04}@{a}")).filter(|id| s.task(id).is_some()).collect()
            };
            for id in ids {
                for label in ["Positive", "Neutral"] {
                    let app = app.clone();
                    let body = submission(&id, a, "Black", label);
                    handles.push(tokio::spawn(async move { call(&app, post_req(&body)).await }));
                }
            }
        }
        let mut seqs = Vec::new();
        for h in handles {
            let (status, body) = h.await.unwrap();
            assert_eq!(status, StatusCode::OK);
            seqs.push(body["seq"].as_u64().unwrap());
        }
        seqs.sort_unstable();
        assert_eq!(seqs, (1..=12).collect::<Vec<u64>>());
        let (_, health) = call(&app, get_req("/api/health")).await;
        assert_eq!(health["log_length"], 12);
        for a in ["ann1", "ann2"] {
            let (_, reply) = call(&app, get_req(&format!("/api/task?annotator={a}"))).await;
            assert_eq!(reply, json!({ "done": true }));
        }
    }

    #[tokio::test]
    async fn serves_static_assets() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("index.html"), "<h1>hi</h1>").unwrap();
        let recs = records(1);
        let tasks = create_tasks(&recs, 0.0, &annotators(&["a"]), 1).unwrap();
        let service = Arc::new(RwLock::new(AnnotationService::in_memory(recs, tasks).unwrap()));
        let app = router(service, Some(dir.path().to_path_buf()));
        let res = app.clone().oneshot(get_req("/")).await.unwrap();
        assert_eq!(res.status(), StatusCode::OK);
        assert_eq!(res.headers()[header::CONTENT_TYPE], "text/html; charset=utf-8");
        assert_eq!(app.clone().oneshot(get_req("/../Cargo.toml")).await.unwrap().status(), StatusCode::NOT_FOUND);
    }
}
